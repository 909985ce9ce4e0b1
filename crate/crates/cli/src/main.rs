use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use wcs_core::experiments::bounds::{bounds_report, BoundsConfig};
use wcs_core::experiments::presets::{all_presets, preset, preset_names, Scale};
use wcs_core::experiments::{builtin_catalog, builtin_function, run_experiment, write_outputs, ExperimentConfig};
use wcs_core::reconstruction::{reconstruct, write_coefficients_csv, write_error_report};
use wcs_core::weights::weights_from_strategy;
use wcs_core::{BasisSpec, Error, IndexSetKind, Scenario, SolverOptions, WeightStrategy};

const EXIT_CONFIG: u8 = 2;
const EXIT_ALL_FAILED: u8 = 3;

#[derive(Parser)]
#[command(name = "wcs", version, about = "Weighted l1 function interpolation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write results.csv, summary.csv, meta.json
    Run {
        config: PathBuf,
        /// Output directory; defaults to `out/<config name or hash>`
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print guarantee quantities for a bounds config
    Bounds {
        config: PathBuf,
        /// Print JSON instead of a table
        #[arg(long)]
        json: bool,
    },
    /// Solve a single instance
    Solve(SolveArgs),
    /// List builtin target functions
    Functions,
    /// Print a preset config, or write all of them into a directory
    Presets {
        name: Option<String>,
        #[arg(long, value_enum, default_value = "fast")]
        scale: ScaleArg,
        #[arg(long)]
        write: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Fast,
    Paper,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Unit,
    /// (i + 1)^p, d = 1
    Poly,
    /// prod_j (i_j + 1)^p
    Product,
    /// (|i|_1 + 1)^p
    Degree,
    /// u_i^p
    Intrinsic,
}

#[derive(clap::Args)]
struct SolveArgs {
    #[arg(long)]
    function: String,
    #[arg(long, default_value = "CC")]
    scenario: String,
    #[arg(long = "index-set", default_value = "TP")]
    index_set: String,
    #[arg(long = "K")]
    k: u32,
    #[arg(long)]
    m: usize,
    #[arg(long, value_enum, default_value = "unit")]
    weights: StrategyArg,
    #[arg(long, default_value_t = 0.0)]
    param: f64,
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "max-iters")]
    max_iters: Option<usize>,
    /// Directory for coefficients.csv and error.json
    #[arg(long)]
    out: Option<PathBuf>,
}

fn config_error(e: &Error) -> bool {
    matches!(e, Error::Config(_) | Error::UnknownFunction { .. } | Error::Json(_) | Error::InvalidParameter(_))
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if config_error(&e) { EXIT_CONFIG } else { 1 })
}

fn parse_enum<T: serde::de::DeserializeOwned>(what: &str, value: &str) -> Result<T, Error> {
    serde_json::from_value(serde_json::Value::String(value.to_string()))
        .map_err(|_| Error::Config(format!("unknown {what} {value}")))
}

fn run(config: PathBuf, out: Option<PathBuf>) -> Result<ExitCode, Error> {
    let config = ExperimentConfig::load(&config)?;
    let output = run_experiment(&config)?;
    let dir = out.unwrap_or_else(|| PathBuf::from("out").join(config.name.clone().unwrap_or_else(|| config.hash())));
    write_outputs(&dir, &config, &output)?;
    for s in &output.summary {
        let alpha = s.alpha.map(|a| a.to_string()).unwrap_or_else(|| "-".into());
        println!(
            "m={:<6} alpha={:<5} converged {}/{}  geomean linf {:.3e}",
            s.m, alpha, s.converged, s.trials, s.geomean_linf_error
        );
    }
    println!("wrote {}", dir.display());
    if output.all_failed() {
        eprintln!("error: every trial failed");
        return Ok(ExitCode::from(EXIT_ALL_FAILED));
    }
    Ok(ExitCode::SUCCESS)
}

fn solve(args: SolveArgs) -> Result<ExitCode, Error> {
    let scenario: Scenario = parse_enum("scenario", &args.scenario)?;
    let kind: IndexSetKind = parse_enum("index set", &args.index_set)?;
    let f = builtin_function(&args.function).map_err(|e| Error::Config(e.to_string()))?;
    let spec = BasisSpec::new(scenario, f.dimension())?;
    let set = kind.build(f.dimension(), args.k)?;
    let p = args.param;
    let strategy = match args.weights {
        StrategyArg::Unit => WeightStrategy::Unit,
        StrategyArg::Poly => WeightStrategy::PolynomialGrowth { alpha: p },
        StrategyArg::Product => WeightStrategy::AnisotropicProduct { alpha: p },
        StrategyArg::Degree => WeightStrategy::TotalDegreeGrowth { alpha: p },
        StrategyArg::Intrinsic => WeightStrategy::IntrinsicPower { theta: p },
    };
    let weights = weights_from_strategy(&strategy, &set, &spec)?;
    let mut opts = SolverOptions::default();
    if let Some(n) = args.max_iters {
        opts.max_iters = n;
    }
    let (result, report) = reconstruct(&f, &spec, &set, &weights, args.m, args.eta, args.seed, &opts)?;
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        write_coefficients_csv(&dir.join("coefficients.csv"), &set, &result.coefficients)?;
        write_error_report(&dir.join("error.json"), &report)?;
    }
    let summary = serde_json::json!({
        "N": set.len(),
        "objective": result.objective,
        "iterations": result.iterations,
        "converged": result.converged,
        "kkt_gap": result.kkt_gap,
        "error": report,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(ExitCode::SUCCESS)
}

fn presets(name: Option<String>, scale: ScaleArg, write: Option<PathBuf>) -> Result<ExitCode, Error> {
    let scale = match scale {
        ScaleArg::Fast => Scale::Fast,
        ScaleArg::Paper => Scale::Paper,
    };
    if let Some(dir) = write {
        std::fs::create_dir_all(&dir)?;
        for c in all_presets() {
            let name = c.name.clone().expect("presets are named");
            std::fs::write(dir.join(format!("{name}.json")), c.to_json() + "\n")?;
        }
        println!("wrote {} presets to {}", preset_names().len() * 2, dir.display());
    } else if let Some(name) = name {
        println!("{}", preset(&name, scale)?.to_json());
    } else {
        for name in preset_names() {
            println!("{name}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, out } => run(config, out),
        Command::Bounds { config, json } => BoundsConfig::load(&config).and_then(|c| bounds_report(&c)).and_then(|r| {
            if json {
                println!("{}", serde_json::to_string_pretty(&r)?);
            } else {
                print!("{}", r.to_table());
            }
            Ok(ExitCode::SUCCESS)
        }),
        Command::Solve(args) => solve(args),
        Command::Functions => {
            for (id, d, formula) in builtin_catalog() {
                println!("{id:<12} d={d:<3} {formula}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Presets { name, scale, write } => presets(name, scale, write),
    };
    outcome.unwrap_or_else(fail)
}
