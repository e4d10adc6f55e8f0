use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use iqaoa_sat::evolve::GaConfig;
use iqaoa_sat::harness::{self, AngleSource, Format, HarnessError, Level, OptimizeOptions};
use iqaoa_sat::oracle::{Oracle, DEFAULT_MAX_VARS};
use iqaoa_sat::qsim::QubitOrder;
use iqaoa_sat::shaping::QuantileSet;

#[derive(Parser)]
#[command(name = "iqaoa", version, about = "Rank-phase QAOA workbench for 3-SAT / MaxSAT")]
struct Cli {
    /// Worker threads for evaluation and enumeration (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    H,
    G,
}

impl From<LevelArg> for Level {
    fn from(l: LevelArg) -> Self {
        match l {
            LevelArg::H => Level::H,
            LevelArg::G => Level::G,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    /// DIMACS variable j+1 on qubit j (rank weight 2^j).
    LsbFirst,
    /// Variable 1 on the highest-weight qubit.
    MsbFirst,
}

impl From<OrderArg> for QubitOrder {
    fn from(o: OrderArg) -> Self {
        match o {
            OrderArg::LsbFirst => QubitOrder::LsbFirst,
            OrderArg::MsbFirst => QubitOrder::MsbFirst,
        }
    }
}

#[derive(Args)]
struct GaArgs {
    #[arg(long, default_value_t = 150)]
    generations: usize,
    #[arg(long, default_value_t = 30)]
    population: usize,
    #[arg(long, default_value_t = 0.25)]
    mutation: f64,
    #[arg(long, default_value_t = 3)]
    tournament: usize,
    #[arg(long, default_value_t = 4)]
    elites: usize,
    /// Shots per fitness evaluation.
    #[arg(long, default_value_t = 250)]
    shots: usize,
    /// Circuit depth p.
    #[arg(long, default_value_t = 2)]
    depth: usize,
    /// Comma-separated quantile levels, e.g. 0.01,0.05,0.1.
    #[arg(long, default_value = "0.01,0.05,0.1")]
    quantiles: String,
    /// Placement of the variables on the rank register.
    #[arg(long, value_enum, default_value_t = OrderArg::LsbFirst)]
    qubit_order: OrderArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Parse an instance and print its size.
    Validate { path: PathBuf },
    /// Exact distribution of unsatisfied-clause counts over all assignments.
    Enumerate {
        path: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
        #[arg(long, default_value_t = DEFAULT_MAX_VARS)]
        max_vars: usize,
    },
    /// Run the genetic angle search and write a run artifact.
    Optimize {
        path: PathBuf,
        #[command(flatten)]
        ga: GaArgs,
        /// Shots in the final sample at the best angles.
        #[arg(long, default_value_t = harness::DEFAULT_FINAL_SHOTS)]
        final_shots: usize,
        #[arg(long, default_value_t = DEFAULT_MAX_VARS)]
        max_vars: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample an instance at stored (or zero) angles.
    Sample {
        path: PathBuf,
        /// Run artifact, sample report or angle list; zero angles if omitted.
        #[arg(long)]
        angles: Option<PathBuf>,
        /// Depth of the zero-angle circuit when --angles is omitted.
        #[arg(long, default_value_t = 2)]
        depth: usize,
        /// Register order for zero angles or a bare angle list.
        #[arg(long, value_enum, default_value_t = OrderArg::LsbFirst)]
        qubit_order: OrderArg,
        #[arg(long, default_value_t = harness::DEFAULT_FINAL_SHOTS)]
        shots: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = LevelArg::H)]
        level: LevelArg,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
        /// Also write the sample report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the histogram stored in an artifact or sample report.
    Report {
        path: PathBuf,
        #[arg(long, value_enum, default_value_t = LevelArg::H)]
        level: LevelArg,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
        /// Exact final distribution from the artifact's oracle section.
        #[arg(long)]
        exact: bool,
    },
    /// Side-by-side h distributions of two artifacts or sample reports.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
    },
    /// Download the SATLIB uf20-91 instances.
    FetchSatlib {
        #[arg(long, default_value = harness::SATLIB_UF20_URL)]
        url: String,
        #[arg(long, default_value = "instances/uf20-91")]
        dest: PathBuf,
        #[arg(long, default_value_t = harness::SATLIB_UF20_COUNT)]
        expect: usize,
    },
}

fn run(cli: Cli) -> Result<String, HarnessError> {
    match cli.command {
        Command::Validate { path } => harness::cmd_validate(&path),
        Command::Enumerate { path, format, max_vars } => {
            harness::cmd_enumerate(&path, format.into(), Oracle { max_vars })
        }
        Command::Optimize { path, ga, final_shots, max_vars, out } => {
            let config = GaConfig {
                generations: ga.generations,
                population: ga.population,
                mutation_prob: ga.mutation,
                tournament_size: ga.tournament,
                elites: ga.elites,
                shots_per_eval: ga.shots,
                depth: ga.depth,
                quantile_levels: QuantileSet::parse(&ga.quantiles)?,
                mutation: Default::default(),
                qubit_order: ga.qubit_order.into(),
                seed: ga.seed,
            };
            config.validate()?;
            let opts = OptimizeOptions { config, final_shots, oracle: Oracle { max_vars } };
            harness::cmd_optimize(&path, &opts, out.as_deref()).map(|(_, text)| text)
        }
        Command::Sample { path, angles, depth, qubit_order, shots, seed, level, format, out } => {
            let source = match &angles {
                Some(p) => AngleSource::File(p),
                None => AngleSource::Zero { depth },
            };
            harness::cmd_sample(
                &path,
                source,
                qubit_order.into(),
                shots,
                seed,
                level.into(),
                format.into(),
                out.as_deref(),
            )
            .map(|(_, text)| text)
        }
        Command::Report { path, level, format, exact } => {
            harness::cmd_report(&path, level.into(), format.into(), exact)
        }
        Command::Compare { a, b, format } => harness::cmd_compare(&a, &b, format.into()),
        Command::FetchSatlib { url, dest, expect } => harness::cmd_fetch_satlib(&url, &dest, expect),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
