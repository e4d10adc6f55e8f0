//! Command implementations behind the `iqaoa` binary: instance loading, run
//! artifacts, histogram reports and the SATLIB fetch helper.
//!
//! Commands return their text output instead of printing so they can be
//! driven from tests.

use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cnf::{self, default_params, CnfFormula, CostParams, InstanceError, PackedFormula, ParseError};
use crate::evolve::{optimize, stream_rng, ConfigError, GaConfig, RunHistory, StreamKind};
use crate::oracle::{Oracle, OracleError};
use crate::qsim::{prepare_state, sample, AngleVector, QubitOrder};
use crate::shaping::{quantile, rows_to_csv, rows_to_json, CostHistogram, QuantileSetError, TableRow};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_FINAL_SHOTS: usize = 100_000;
pub const SATLIB_UF20_URL: &str = "https://www.cs.ubc.ca/~hoos/SATLIB/Benchmarks/SAT/RND3SAT/uf20-91.tar.gz";
pub const SATLIB_UF20_COUNT: usize = 1000;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error("{path}: {source}")]
    Instance { path: PathBuf, source: InstanceError },
    #[error("{path}: not a run artifact, sample report or angle list: {source}")]
    Artifact { path: PathBuf, source: serde_json::Error },
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("invalid quantile levels: {0}")]
    Quantiles(#[from] QuantileSetError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("{0}")]
    Mismatch(String),
    #[error("fetch failed: {0}")]
    Fetch(String),
}

impl HarnessError {
    /// 2 for bad input, 1 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Write { .. } | Self::Fetch(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Which cost a histogram report shows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Level {
    #[default]
    H,
    G,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceInfo {
    pub sha256: String,
    pub n: usize,
    pub m: usize,
}

pub struct LoadedInstance {
    pub formula: CnfFormula,
    pub info: InstanceInfo,
    pub path: PathBuf,
}

fn read(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|source| HarnessError::Read { path: path.to_path_buf(), source })
}

fn write(path: &Path, text: &str) -> Result<(), HarnessError> {
    fs::write(path, text).map_err(|source| HarnessError::Write { path: path.to_path_buf(), source })
}

/// Loads a DIMACS file, or the JSON instance format for `.json` paths.
pub fn load_instance(path: &Path) -> Result<LoadedInstance, HarnessError> {
    let text = read(path)?;
    let formula = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        CnfFormula::from_json(&text).map_err(|source| HarnessError::Instance { path: path.to_path_buf(), source })?
    } else {
        cnf::parse_dimacs(&text).map_err(|source| HarnessError::Parse { path: path.to_path_buf(), source })?
    };
    let info = InstanceInfo {
        sha256: hex::encode(Sha256::digest(text.as_bytes())),
        n: formula.num_vars(),
        m: formula.num_clauses(),
    };
    Ok(LoadedInstance { formula, info, path: path.to_path_buf() })
}

pub fn cmd_validate(path: &Path) -> Result<String, HarnessError> {
    let inst = load_instance(path)?;
    let f = &inst.formula;
    let lens: Vec<usize> = f.clauses().iter().map(|c| c.literals().len()).collect();
    let mut out = format!("n={} m={}\n", f.num_vars(), f.num_clauses());
    let _ = writeln!(out, "literals={}", f.num_literals());
    if let (Some(min), Some(max)) = (lens.iter().min(), lens.iter().max()) {
        let _ =
            writeln!(out, "clause_length min={min} max={max} mean={:.3}", f.num_literals() as f64 / lens.len() as f64);
    }
    let _ = writeln!(out, "sha256={}", inst.info.sha256);
    Ok(out)
}

pub fn render_rows(label: &str, rows: &[TableRow], format: Format) -> String {
    match format {
        Format::Csv => rows_to_csv(label, rows),
        Format::Json => rows_to_json(label, rows) + "\n",
    }
}

pub fn cmd_enumerate(path: &Path, format: Format, oracle: Oracle) -> Result<String, HarnessError> {
    let inst = load_instance(path)?;
    let table = oracle.enumerate_h(&inst.formula)?;
    Ok(render_rows("h", &table.rows(), format))
}

/// `(value, count)` pair of a stored histogram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistRow {
    pub value: f64,
    pub count: u64,
}

fn to_hist_rows(h: &CostHistogram) -> Vec<HistRow> {
    h.entries().map(|(value, count)| HistRow { value, count }).collect()
}

fn from_hist_rows(rows: &[HistRow]) -> CostHistogram {
    CostHistogram::from_counts(rows.iter().map(|r| (r.value, r.count)))
}

/// Histograms of one shot sample at fixed angles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub instance: InstanceInfo,
    pub angles: AngleVector,
    #[serde(default)]
    pub qubit_order: QubitOrder,
    pub shots: usize,
    pub seed: u64,
    pub h_histogram: Vec<HistRow>,
    pub g_histogram: Vec<HistRow>,
}

impl SampleSummary {
    pub fn h(&self) -> CostHistogram {
        from_hist_rows(&self.h_histogram)
    }

    pub fn g(&self) -> CostHistogram {
        from_hist_rows(&self.g_histogram)
    }
}

/// Draws `shots` measurements at `angles` from the stream derived from `seed`.
pub fn draw_sample(
    inst: &LoadedInstance,
    angles: &AngleVector,
    qubit_order: QubitOrder,
    shots: usize,
    seed: u64,
) -> SampleSummary {
    let f = &inst.formula;
    let state = prepare_state(f.num_vars(), angles);
    let mut rng = stream_rng(seed, StreamKind::FinalSample, 0, 0);
    let set = sample(&state, shots, &mut rng);
    let packed = PackedFormula::new(&qubit_order.arrange(f));
    let params = default_params(f);
    let mut h = CostHistogram::new();
    let mut g = CostHistogram::new();
    for &r in set.ranks() {
        let (hv, d) = packed.h_and_divergence(r);
        h.add(f64::from(hv), 1);
        g.add(params.zeta * f64::from(hv) + params.vartheta * d as f64, 1);
    }
    SampleSummary {
        instance: inst.info.clone(),
        angles: angles.clone(),
        qubit_order,
        shots,
        seed,
        h_histogram: to_hist_rows(&h),
        g_histogram: to_hist_rows(&g),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSection {
    /// Exact `h` counts over all assignments (the uniform initial state).
    pub initial: Vec<TableRow>,
    /// Exact infinite-shot `h` distribution at the best angles.
    pub final_exact: Vec<TableRow>,
}

impl OracleSection {
    pub fn solution_count(&self) -> u64 {
        self.initial.iter().find(|r| r.value == 0.0).and_then(|r| r.count).unwrap_or(0)
    }
}

/// Everything that must be identical when a run is repeated with the same
/// instance, configuration and seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReproducibleSection {
    pub tool_version: String,
    pub instance: InstanceInfo,
    pub config: GaConfig,
    pub cost_params: CostParams,
    pub history: RunHistory,
    pub best_angles: AngleVector,
    pub best_fitness: f64,
    pub final_sample: SampleSummary,
    pub oracle: Option<OracleSection>,
}

impl ReproducibleSection {
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("artifact serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub instance_path: String,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub threads: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunArtifact {
    pub schema_version: u32,
    pub reproducibility_hash: String,
    pub reproducible: ReproducibleSection,
    pub run_info: RunInfo,
}

impl RunArtifact {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("artifact serializes")
    }

    /// `P_final(h=0) / P_uniform(h=0)`, when the oracle section is present and
    /// the instance is satisfiable.
    pub fn improvement_factor(&self) -> Option<f64> {
        let oracle = self.reproducible.oracle.as_ref()?;
        let count0 = oracle.solution_count();
        if count0 == 0 {
            return None;
        }
        let uniform = count0 as f64 / (1u64 << self.reproducible.instance.n) as f64;
        Some(self.reproducible.final_sample.h().frequency(0.0) / uniform)
    }
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

#[derive(Clone, Debug)]
pub struct OptimizeOptions {
    pub config: GaConfig,
    pub final_shots: usize,
    pub oracle: Oracle,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self { config: GaConfig::default(), final_shots: DEFAULT_FINAL_SHOTS, oracle: Oracle::default() }
    }
}

/// Runs the GA, samples the best angles and assembles the artifact.
pub fn run_optimize(inst: &LoadedInstance, opts: &OptimizeOptions) -> Result<RunArtifact, HarnessError> {
    let started = now_ms();
    let f = &inst.formula;
    let result = optimize(f, &opts.config)?;
    let order = opts.config.qubit_order;
    let final_sample = draw_sample(inst, &result.best_angles, order, opts.final_shots, opts.config.seed);
    let arranged = order.arrange(f);
    let oracle = match (opts.oracle.enumerate_h(f), opts.oracle.exact_h_distribution(&arranged, &result.best_angles)) {
        (Ok(initial), Ok(final_exact)) => {
            Some(OracleSection { initial: initial.rows(), final_exact: final_exact.rows() })
        }
        _ => None,
    };
    let reproducible = ReproducibleSection {
        tool_version: TOOL_VERSION.to_string(),
        instance: inst.info.clone(),
        config: opts.config.clone(),
        cost_params: default_params(f),
        history: result.history,
        best_angles: result.best_angles,
        best_fitness: result.best_fitness,
        final_sample,
        oracle,
    };
    Ok(RunArtifact {
        schema_version: SCHEMA_VERSION,
        reproducibility_hash: reproducible.hash(),
        reproducible,
        run_info: RunInfo {
            instance_path: inst.path.display().to_string(),
            started_unix_ms: started,
            finished_unix_ms: now_ms(),
            threads: rayon::current_num_threads(),
        },
    })
}

/// Text printed by the `optimize` command.
pub fn optimize_summary(artifact: &RunArtifact) -> String {
    let rep = &artifact.reproducible;
    let mut out = format!(
        "instance n={} m={} seed={} generations={}\n",
        rep.instance.n, rep.instance.m, rep.config.seed, rep.config.generations
    );
    let _ = writeln!(out, "best fitness {}", rep.best_fitness);
    let angles: Vec<String> =
        rep.best_angles.layers().map(|l| format!("(beta={:.6}, gamma={:.6})", l.beta, l.gamma)).collect();
    let _ = writeln!(out, "best angles {}", angles.join(" "));
    let _ = writeln!(out, "final sample: {} shots", rep.final_sample.shots);
    out.push_str(&rows_to_csv("h", &rep.final_sample.h().rows()));
    match artifact.improvement_factor() {
        Some(k) => {
            let _ = writeln!(out, "improvement factor P(h=0) final/uniform = {k:.6}");
        }
        None => out.push_str("improvement factor unavailable (no oracle section or no solutions)\n"),
    }
    out
}

pub fn cmd_optimize(
    path: &Path,
    opts: &OptimizeOptions,
    out: Option<&Path>,
) -> Result<(RunArtifact, String), HarnessError> {
    let inst = load_instance(path)?;
    let artifact = run_optimize(&inst, opts)?;
    if let Some(out) = out {
        write(out, &(artifact.to_json() + "\n"))?;
    }
    let summary = optimize_summary(&artifact);
    Ok((artifact, summary))
}

/// A JSON file holding sample histograms: a run artifact (its final sample)
/// or a standalone sample report.
fn load_sample_summary(path: &Path) -> Result<SampleSummary, HarnessError> {
    let text = read(path)?;
    let err = |source| HarnessError::Artifact { path: path.to_path_buf(), source };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(err)?;
    if value.get("reproducible").is_some() {
        let a: RunArtifact = serde_json::from_value(value).map_err(err)?;
        Ok(a.reproducible.final_sample)
    } else {
        serde_json::from_value(value).map_err(err)
    }
}

pub fn load_artifact(path: &Path) -> Result<RunArtifact, HarnessError> {
    let text = read(path)?;
    serde_json::from_str(&text).map_err(|source| HarnessError::Artifact { path: path.to_path_buf(), source })
}

/// Angles read from a file, with the instance and register order they were
/// produced for when the file records them.
pub struct StoredAngles {
    pub angles: AngleVector,
    pub instance: Option<InstanceInfo>,
    pub qubit_order: Option<QubitOrder>,
}

/// Reads angles from a run artifact, a sample report or a bare
/// `[{"beta":..,"gamma":..}]` list.
pub fn load_angles(path: &Path) -> Result<StoredAngles, HarnessError> {
    let text = read(path)?;
    let err = |source| HarnessError::Artifact { path: path.to_path_buf(), source };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(err)?;
    if value.is_array() {
        let angles = serde_json::from_value(value).map_err(err)?;
        return Ok(StoredAngles { angles, instance: None, qubit_order: None });
    }
    let summary = load_sample_summary(path)?;
    let angles = if value.get("reproducible").is_some() {
        load_artifact(path)?.reproducible.best_angles
    } else {
        summary.angles
    };
    Ok(StoredAngles { angles, instance: Some(summary.instance), qubit_order: Some(summary.qubit_order) })
}

pub enum AngleSource<'a> {
    File(&'a Path),
    Zero { depth: usize },
}

/// `qubit_order` applies to zero angles and bare angle lists; artifacts and
/// sample reports carry their own.
#[allow(clippy::too_many_arguments)]
pub fn cmd_sample(
    path: &Path,
    angles: AngleSource<'_>,
    qubit_order: QubitOrder,
    shots: usize,
    seed: u64,
    level: Level,
    format: Format,
    out: Option<&Path>,
) -> Result<(SampleSummary, String), HarnessError> {
    if shots == 0 {
        return Err(HarnessError::Mismatch("--shots must be at least 1".into()));
    }
    let inst = load_instance(path)?;
    let (angles, order) = match angles {
        AngleSource::Zero { depth } => (AngleVector::zeros(depth.max(1)), qubit_order),
        AngleSource::File(p) => {
            let stored = load_angles(p)?;
            if let Some(info) = stored.instance {
                if info.n != inst.info.n {
                    return Err(HarnessError::Mismatch(format!(
                        "angles were produced for n={} but the instance has n={}",
                        info.n, inst.info.n
                    )));
                }
            }
            (stored.angles, stored.qubit_order.unwrap_or(qubit_order))
        }
    };
    let summary = draw_sample(&inst, &angles, order, shots, seed);
    if let Some(out) = out {
        write(out, &(serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"))?;
    }
    let text = render_level(&summary, level, format);
    Ok((summary, text))
}

fn render_level(summary: &SampleSummary, level: Level, format: Format) -> String {
    match level {
        Level::H => render_rows("h", &summary.h().rows(), format),
        Level::G => render_rows("g", &summary.g().rows(), format),
    }
}

/// Re-emits the stored histograms of an artifact or sample report; with
/// `exact`, the artifact's oracle distribution at the best angles instead.
pub fn cmd_report(path: &Path, level: Level, format: Format, exact: bool) -> Result<String, HarnessError> {
    if exact {
        let artifact = load_artifact(path)?;
        let oracle = artifact.reproducible.oracle.ok_or_else(|| {
            HarnessError::Mismatch("artifact has no oracle section (instance above the enumeration limit)".into())
        })?;
        return Ok(render_rows("h", &oracle.final_exact, format));
    }
    Ok(render_level(&load_sample_summary(path)?, level, format))
}

/// Summary statistics of an `h` histogram.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistogramStats {
    pub p_h0: f64,
    pub decile: f64,
    pub median: f64,
    pub mean: f64,
}

pub fn histogram_stats(h: &CostHistogram) -> HistogramStats {
    HistogramStats { p_h0: h.frequency(0.0), decile: quantile(h, 0.1), median: quantile(h, 0.5), mean: h.mean() }
}

#[derive(Serialize)]
struct CompareRow {
    h: f64,
    a: f64,
    b: f64,
}

#[derive(Serialize)]
struct CompareDoc {
    rows: Vec<CompareRow>,
    a: HistogramStats,
    b: HistogramStats,
}

/// Side-by-side `h` distributions (percentages) plus summary statistics.
pub fn compare_histograms(a: &CostHistogram, b: &CostHistogram, format: Format) -> String {
    let mut values: Vec<f64> = a.entries().chain(b.entries()).map(|(v, _)| v).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let rows: Vec<CompareRow> =
        values.iter().map(|&h| CompareRow { h, a: a.frequency(h) * 100.0, b: b.frequency(h) * 100.0 }).collect();
    let (sa, sb) = (histogram_stats(a), histogram_stats(b));
    match format {
        Format::Json => {
            serde_json::to_string_pretty(&CompareDoc { rows, a: sa, b: sb }).expect("compare serializes") + "\n"
        }
        Format::Csv => {
            let mut s = String::from("h,a_probability,b_probability\n");
            for r in &rows {
                let _ = writeln!(s, "{},{:.6},{:.6}", r.h, r.a, r.b);
            }
            s.push_str("stat,a,b\n");
            let _ = writeln!(s, "p_h0,{:.6},{:.6}", sa.p_h0 * 100.0, sb.p_h0 * 100.0);
            let _ = writeln!(s, "e_0.1,{},{}", sa.decile, sb.decile);
            let _ = writeln!(s, "e_0.5,{},{}", sa.median, sb.median);
            let _ = writeln!(s, "mean_h,{:.6},{:.6}", sa.mean, sb.mean);
            s
        }
    }
}

pub fn cmd_compare(a: &Path, b: &Path, format: Format) -> Result<String, HarnessError> {
    let sa = load_sample_summary(a)?;
    let sb = load_sample_summary(b)?;
    if sa.instance.sha256 != sb.instance.sha256 {
        return Err(HarnessError::Mismatch(format!(
            "instance mismatch: {} vs {}",
            sa.instance.sha256, sb.instance.sha256
        )));
    }
    Ok(compare_histograms(&sa.h(), &sb.h(), format))
}

/// Unpacks every `.cnf` member of a gzipped tarball into `dest` (flattened)
/// and returns how many were written.
pub fn extract_instances<R: Read>(archive: R, dest: &Path) -> Result<usize, HarnessError> {
    let io_err = |e: std::io::Error| HarnessError::Fetch(e.to_string());
    fs::create_dir_all(dest).map_err(|source| HarnessError::Write { path: dest.to_path_buf(), source })?;
    let mut tar = tar::Archive::new(flate2::read::GzDecoder::new(archive));
    let mut written = 0;
    for entry in tar.entries().map_err(io_err)? {
        let mut entry = entry.map_err(io_err)?;
        let path = entry.path().map_err(io_err)?.into_owned();
        let is_cnf = path.extension().is_some_and(|e| e == "cnf");
        let Some(name) = path.file_name().filter(|_| is_cnf && entry.header().entry_type().is_file()) else {
            continue;
        };
        let target = dest.join(name);
        let mut buf = Vec::new();
        entry.read_to_end(&mut buf).map_err(io_err)?;
        fs::write(&target, buf).map_err(|source| HarnessError::Write { path: target.clone(), source })?;
        written += 1;
    }
    Ok(written)
}

/// Downloads the uniform random 3-SAT tarball and checks the file count.
pub fn cmd_fetch_satlib(url: &str, dest: &Path, expected: usize) -> Result<String, HarnessError> {
    let mut response = ureq::get(url).call().map_err(|e| HarnessError::Fetch(format!("{url}: {e}")))?;
    let bytes = response
        .body_mut()
        .with_config()
        .limit(64 * 1024 * 1024)
        .read_to_vec()
        .map_err(|e| HarnessError::Fetch(format!("{url}: {e}")))?;
    let count = extract_instances(bytes.as_slice(), dest)?;
    if count != expected {
        return Err(HarnessError::Fetch(format!("expected {expected} instances, archive held {count}")));
    }
    Ok(format!("{count} instances written to {}\n", dest.display()))
}
