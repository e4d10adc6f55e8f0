mod common;

use std::io::Write;
use std::path::Path;
use std::process::{Command, Output};

use iqaoa_sat::evolve::GaConfig;
use iqaoa_sat::harness::{
    cmd_compare, cmd_enumerate, cmd_optimize, cmd_report, cmd_sample, cmd_validate, extract_instances, load_artifact,
    AngleSource, Format, HarnessError, Level, OptimizeOptions,
};
use iqaoa_sat::oracle::Oracle;
use iqaoa_sat::qsim::QubitOrder;

fn iqaoa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iqaoa")).args(args).output().unwrap()
}

fn quick_options(seed: u64) -> OptimizeOptions {
    OptimizeOptions {
        config: GaConfig { generations: 5, population: 8, elites: 2, seed, ..GaConfig::default() },
        final_shots: 2000,
        ..OptimizeOptions::default()
    }
}

/// Sums the `probability` column of CSV output (third column).
fn probability_column_sum(csv: &str) -> f64 {
    csv.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap()).sum()
}

#[test]
fn validate_reports_size_and_hash() {
    let out = cmd_validate(&common::data_path("uf20-01.cnf")).unwrap();
    assert!(out.starts_with("n=20 m=91\n"));
    assert!(out.contains("sha256=1f850f5b870adf90cc947f22efe2439d65a65cc42d4f8afd46a74fdf4012273f"));
}

#[test]
fn malformed_instance_exits_2_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cnf");
    std::fs::write(&path, "c bad\np cnf 3 2\n1 2 0\n1 x 0\n").unwrap();
    let out = iqaoa(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 4"), "{err}");
}

#[test]
fn missing_file_exits_2() {
    let out = iqaoa(&["enumerate", "/nonexistent/x.cnf"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn enumerate_widget_csv() {
    let out = iqaoa(&["enumerate", common::data_path("widget.cnf").to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "h,count,probability,cumfreq\n0,4,12.500000,12.500000\n1,16,50.000000,62.500000\n2,12,37.500000,100.000000\n"
    );
}

#[test]
fn enumerate_uf20_has_thirty_rows() {
    let csv = cmd_enumerate(&common::data_path("uf20-01.cnf"), Format::Csv, Oracle::default()).unwrap();
    assert_eq!(csv.lines().count(), 31);
    assert!((probability_column_sum(&csv) - 100.0).abs() < 0.01);
}

#[test]
fn enumerate_empty_formula_and_guard() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.cnf");
    std::fs::write(&path, "p cnf 4 0\n").unwrap();
    let csv = cmd_enumerate(&path, Format::Csv, Oracle::default()).unwrap();
    assert_eq!(csv, "h,count,probability,cumfreq\n0,16,100.000000,100.000000\n");
    let err = cmd_enumerate(&common::data_path("uf20-01.cnf"), Format::Csv, Oracle { max_vars: 10 }).unwrap_err();
    assert!(matches!(err, HarnessError::Oracle(_)));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn json_instances_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("widget.json");
    std::fs::write(&path, common::widget().to_json()).unwrap();
    let csv = cmd_enumerate(&path, Format::Csv, Oracle::default()).unwrap();
    assert!(csv.contains("1,16,50.000000,62.500000"));
}

#[test]
fn sample_is_deterministic_and_single_shot_works() {
    let w = common::data_path("widget.cnf");
    let a = cmd_sample(&w, AngleSource::Zero { depth: 2 }, QubitOrder::LsbFirst, 5000, 7, Level::H, Format::Csv, None)
        .unwrap();
    let b = cmd_sample(&w, AngleSource::Zero { depth: 2 }, QubitOrder::LsbFirst, 5000, 7, Level::H, Format::Csv, None)
        .unwrap();
    assert_eq!(a, b);
    assert!((probability_column_sum(&a.1) - 100.0).abs() < 0.01);
    let (one, text) =
        cmd_sample(&w, AngleSource::Zero { depth: 1 }, QubitOrder::LsbFirst, 1, 0, Level::G, Format::Csv, None)
            .unwrap();
    assert_eq!(one.h().total(), 1);
    assert_eq!(text.lines().count(), 2);
    assert!(cmd_sample(&w, AngleSource::Zero { depth: 1 }, QubitOrder::LsbFirst, 0, 0, Level::H, Format::Csv, None)
        .is_err());
}

#[test]
fn optimize_artifact_round_trip_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let w = common::data_path("widget.cnf");
    let out = dir.path().join("run.json");
    let (artifact, summary) = cmd_optimize(&w, &quick_options(3), Some(&out)).unwrap();
    assert!(summary.contains("improvement factor"));
    let loaded = load_artifact(&out).unwrap();
    assert_eq!(loaded, artifact);
    assert_eq!(loaded.reproducible.hash(), loaded.reproducibility_hash);

    // improvement factor equals sampled P(h=0) over count0 / 2^n
    let oracle = artifact.reproducible.oracle.as_ref().unwrap();
    assert_eq!(oracle.solution_count(), 4);
    let p0 = artifact.reproducible.final_sample.h().frequency(0.0);
    let k = artifact.improvement_factor().unwrap();
    assert!(((k - p0 / (4.0 / 32.0)) / k).abs() < 1e-6);

    for csv in [
        cmd_report(&out, Level::H, Format::Csv, false).unwrap(),
        cmd_report(&out, Level::G, Format::Csv, false).unwrap(),
        cmd_report(&out, Level::H, Format::Csv, true).unwrap(),
    ] {
        assert!((probability_column_sum(&csv) - 100.0).abs() < 0.01, "{csv}");
    }

    // resampling from the artifact reuses its angles
    let resampled = dir.path().join("resample.json");
    let (s, _) =
        cmd_sample(&w, AngleSource::File(&out), QubitOrder::LsbFirst, 1000, 1, Level::H, Format::Csv, Some(&resampled))
            .unwrap();
    assert_eq!(s.angles, artifact.reproducible.best_angles);
    let (again, _) =
        cmd_sample(&w, AngleSource::File(&resampled), QubitOrder::LsbFirst, 1000, 1, Level::H, Format::Csv, None)
            .unwrap();
    assert_eq!(again.angles, s.angles);

    let cmp = cmd_compare(&out, &out, Format::Csv).unwrap();
    for line in cmp.lines().skip(1).take_while(|l| !l.starts_with("stat")) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[1], cols[2]);
    }
    let cmp = cmd_compare(&out, &resampled, Format::Json).unwrap();
    assert!(cmp.contains("\"rows\""));
}

#[test]
fn compare_rejects_different_instances() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    cmd_sample(
        &common::data_path("widget.cnf"),
        AngleSource::Zero { depth: 1 },
        QubitOrder::LsbFirst,
        10,
        0,
        Level::H,
        Format::Csv,
        Some(&a),
    )
    .unwrap();
    cmd_sample(
        &common::data_path("uf20-01.cnf"),
        AngleSource::Zero { depth: 1 },
        QubitOrder::LsbFirst,
        10,
        0,
        Level::H,
        Format::Csv,
        Some(&b),
    )
    .unwrap();
    let err = cmd_compare(&a, &b, Format::Csv).unwrap_err();
    assert!(matches!(err, HarnessError::Mismatch(_)));
    // widget angles carry n=5 and cannot drive a 20-variable instance
    let err = cmd_sample(
        &common::data_path("uf20-01.cnf"),
        AngleSource::File(&a),
        QubitOrder::LsbFirst,
        10,
        0,
        Level::H,
        Format::Csv,
        None,
    )
    .unwrap_err();
    assert!(matches!(err, HarnessError::Mismatch(_)));
}

#[test]
fn zero_generations_returns_initial_best() {
    let mut opts = quick_options(1);
    opts.config.generations = 0;
    let (artifact, _) = cmd_optimize(&common::data_path("widget.cnf"), &opts, None).unwrap();
    assert_eq!(artifact.reproducible.history.len(), 1);
}

#[test]
fn artifact_independent_of_thread_count() {
    let w = common::data_path("widget.cnf");
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| cmd_optimize(&w, &quick_options(9), None).unwrap().0)
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.reproducibility_hash, b.reproducibility_hash);
    assert_ne!(a.run_info.threads, b.run_info.threads);
}

#[test]
fn cli_optimize_and_invalid_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.json");
    let w = common::data_path("widget.cnf");
    let args = ["optimize", w.to_str().unwrap(), "--generations", "2", "--population", "6", "--elites", "1"];
    let res = iqaoa(&[&args[..], &["--final-shots", "500", "--out", out.to_str().unwrap()]].concat());
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(Path::new(&out).exists());
    let res = iqaoa(&["optimize", w.to_str().unwrap(), "--elites", "40"]);
    assert_eq!(res.status.code(), Some(2));
    let res = iqaoa(&["optimize", w.to_str().unwrap(), "--quantiles", "0.5,1.5"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn extracts_cnf_members_from_tarball() {
    let mut gz = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
    {
        let mut tar = tar::Builder::new(&mut gz);
        for (name, body) in
            [("uf20-91/uf20-01.cnf", "p cnf 1 1\n1 0\n"), ("uf20-91/README", "x"), ("uf20-02.cnf", "p cnf 1 0\n")]
        {
            let mut header = tar::Header::new_gnu();
            header.set_size(body.len() as u64);
            header.set_mode(0o644);
            header.set_cksum();
            tar.append_data(&mut header, name, body.as_bytes()).unwrap();
        }
        tar.finish().unwrap();
    }
    let bytes = gz.finish().unwrap();
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(extract_instances(bytes.as_slice(), dir.path()).unwrap(), 2);
    assert!(dir.path().join("uf20-01.cnf").exists());
    assert!(dir.path().join("uf20-02.cnf").exists());
    assert!(!dir.path().join("README").exists());
    let mut f = std::fs::File::create(dir.path().join("junk.tar.gz")).unwrap();
    f.write_all(b"not gzip").unwrap();
    assert!(extract_instances(&b"not gzip"[..], dir.path()).is_err());
}

#[test]
fn msb_first_order_is_recorded_and_reused() {
    let dir = tempfile::tempdir().unwrap();
    let w = common::data_path("uf20-01.cnf");
    let out = dir.path().join("run.json");
    let mut opts = quick_options(4);
    opts.config.qubit_order = QubitOrder::MsbFirst;
    let (artifact, _) = cmd_optimize(&w, &opts, Some(&out)).unwrap();
    assert_eq!(artifact.reproducible.final_sample.qubit_order, QubitOrder::MsbFirst);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("\"qubit_order\": \"msb_first\""));

    // same seed and shot count through the sample command reproduces the final sample,
    // even when the flag asks for the other order
    let shots = artifact.reproducible.final_sample.shots;
    let seed = artifact.reproducible.config.seed;
    let (again, _) =
        cmd_sample(&w, AngleSource::File(&out), QubitOrder::LsbFirst, shots, seed, Level::H, Format::Csv, None)
            .unwrap();
    assert_eq!(again.h_histogram, artifact.reproducible.final_sample.h_histogram);

    // the exact final distribution matches the register order used during the search
    let oracle = artifact.reproducible.oracle.as_ref().unwrap();
    let p0_exact = oracle.final_exact.iter().find(|r| r.value == 0.0).map_or(0.0, |r| r.probability);
    let p0_sampled = artifact.reproducible.final_sample.h().frequency(0.0);
    assert!((p0_exact - p0_sampled).abs() < 0.05);
}
