//! Seeded error-versus-sample-count sweeps.
//!
//! A run writes three files into its output directory:
//!
//! * `results.csv`: one row per `(m, alpha, trial)` with header
//!   `config_hash,m,trial,alpha,linf_error,l2_coeff_error,residual,iterations,converged`
//! * `summary.csv`: geometric means per `(m, alpha)` with header
//!   `m,alpha,trials,converged,geomean_linf_error,geomean_l2_coeff_error`
//! * `meta.json`: the config, seeds, solver tolerances, error grid, code
//!   version and any per-trial failures
//!
//! Wall-clock times go to a fourth file, `timings.csv`, so that the other
//! three are byte-identical across reruns of the same config.

pub mod bounds;
pub mod functions;
pub mod presets;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index_sets::IndexSetKind;
use crate::poly_basis::{BasisSpec, Scenario};
use crate::reconstruction::{reconstruct_with, ErrorGrid, Reference};
use crate::solver::SolverOptions;
use crate::weights::{weights_from_strategy, WeightStrategy, WeightVector};

pub use functions::{builtin_catalog, builtin_function, builtin_ids};

pub const SCHEMA_VERSION: u32 = 1;

pub const RESULTS_HEADER: [&str; 9] =
    ["config_hash", "m", "trial", "alpha", "linf_error", "l2_coeff_error", "residual", "iterations", "converged"];

pub const SUMMARY_HEADER: [&str; 6] =
    ["m", "alpha", "trials", "converged", "geomean_linf_error", "geomean_l2_coeff_error"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub scenario: Scenario,
    pub function_id: String,
    pub d: usize,
    pub index_set_kind: IndexSetKind,
    #[serde(rename = "K")]
    pub k: u32,
    pub weight_strategy: WeightStrategy,
    /// Values substituted for the strategy's scalar parameter; empty means
    /// the strategy as written.
    #[serde(default)]
    pub parameters: Vec<f64>,
    pub m_values: Vec<usize>,
    pub trials: usize,
    #[serde(default)]
    pub eta: f64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub solver_opts: SolverOptions,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("unsupported schema_version {}, expected {SCHEMA_VERSION}", self.schema_version));
        }
        let f = builtin_function(&self.function_id).map_err(|e| Error::Config(e.to_string()))?;
        if f.dimension() != self.d {
            return bad(format!(
                "function {} has dimension {}, config has d = {}",
                self.function_id,
                f.dimension(),
                self.d
            ));
        }
        if self.m_values.is_empty() || self.m_values.contains(&0) {
            return bad("m_values must be nonempty and positive".into());
        }
        if self.m_values.windows(2).any(|p| p[0] >= p[1]) {
            return bad("m_values must be strictly ascending".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return bad(format!("eta must be finite and nonnegative, got {}", self.eta));
        }
        if self.weight_strategy == WeightStrategy::Custom {
            return bad("custom weights cannot be given in a config".into());
        }
        if !self.parameters.is_empty() && self.weight_strategy.parameter().is_none() {
            return bad("parameters given for a weight strategy without a parameter".into());
        }
        if self.parameters.iter().any(|p| !p.is_finite()) {
            return bad("parameters must be finite".into());
        }
        Ok(())
    }

    /// Stable 64-bit FNV-1a hash of the compact JSON form, as 16 hex digits.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let h = text.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3));
        format!("{h:016x}")
    }

    /// Weight strategies swept by the run, in config order.
    pub fn strategies(&self) -> Vec<WeightStrategy> {
        if self.parameters.is_empty() {
            vec![self.weight_strategy.clone()]
        } else {
            self.parameters.iter().map(|&p| self.weight_strategy.with_parameter(p)).collect()
        }
    }

    pub fn spec(&self) -> Result<BasisSpec> {
        BasisSpec::new(self.scenario, self.d)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-trial seed from the base seed and the trial coordinates; changing
/// one coordinate never shifts the seed of another trial.
pub fn trial_seed(base_seed: u64, m: usize, alpha: Option<f64>, trial: usize) -> u64 {
    let alpha_bits = alpha.map_or(u64::MAX, f64::to_bits);
    [m as u64, alpha_bits, trial as u64].into_iter().fold(splitmix(base_seed), |h, v| splitmix(h ^ v))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub config_hash: String,
    pub m: usize,
    pub trial: usize,
    /// The strategy parameter, absent for parameterless strategies.
    pub alpha: Option<f64>,
    pub linf_error: f64,
    pub l2_coeff_error: Option<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub m: usize,
    pub alpha: Option<f64>,
    pub trials: usize,
    pub converged: usize,
    pub geomean_linf_error: f64,
    pub geomean_l2_coeff_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub m: usize,
    pub trial: usize,
    pub alpha: Option<f64>,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config_hash: String,
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
    pub failures: Vec<TrialFailure>,
    pub grid_description: String,
}

impl ExperimentOutput {
    pub fn all_failed(&self) -> bool {
        self.rows.iter().all(|r| !r.converged)
    }
}

fn geomean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v.ln(), n + 1));
    if n == 0 {
        f64::NAN
    } else {
        (sum / n as f64).exp()
    }
}

/// Runs every `(alpha, m, trial)` reconstruction of the config. Component
/// errors become rows with `converged = false` and NaN errors.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let spec = config.spec()?;
    let f = builtin_function(&config.function_id)?;
    let index_set = config.index_set_kind.build(config.d, config.k)?;
    let reference = Reference::build(&f, &spec, &index_set, ErrorGrid::standard(config.d)?)?;
    let hash = config.hash();
    let strategies = config.strategies();
    let weights: Vec<WeightVector> =
        strategies.iter().map(|s| weights_from_strategy(s, &index_set, &spec)).collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize, usize)> = (0..strategies.len())
        .flat_map(|k| config.m_values.iter().flat_map(move |&m| (0..config.trials).map(move |t| (k, m, t))))
        .collect();
    let outcomes: Vec<(ResultRow, Option<TrialFailure>)> = jobs
        .par_iter()
        .map(|&(k, m, trial)| {
            let alpha = strategies[k].parameter();
            let seed = trial_seed(config.base_seed, m, alpha, trial);
            let start = Instant::now();
            let outcome = reconstruct_with(
                &f,
                &spec,
                &index_set,
                &weights[k],
                m,
                config.eta,
                seed,
                &config.solver_opts,
                &reference,
            );
            let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
            let mut row = ResultRow {
                config_hash: hash.clone(),
                m,
                trial,
                alpha,
                linf_error: f64::NAN,
                l2_coeff_error: None,
                residual: f64::NAN,
                iterations: 0,
                converged: false,
                wall_time_ms,
            };
            match outcome {
                Ok((result, report)) => {
                    row.linf_error = report.linf_error;
                    row.l2_coeff_error = report.l2_coeff_error;
                    row.residual = report.residual;
                    row.iterations = result.iterations;
                    row.converged = result.converged;
                    (row, None)
                }
                Err(e) => (row, Some(TrialFailure { m, trial, alpha, message: e.to_string() })),
            }
        })
        .collect();

    let mut rows = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    for (row, failure) in outcomes {
        rows.push(row);
        failures.extend(failure);
    }
    let order = |m: usize, alpha: Option<f64>| (m, alpha.unwrap_or(f64::NEG_INFINITY));
    rows.sort_by(|a, b| order(a.m, a.alpha).partial_cmp(&order(b.m, b.alpha)).unwrap().then(a.trial.cmp(&b.trial)));
    failures.sort_by(|a, b| order(a.m, a.alpha).partial_cmp(&order(b.m, b.alpha)).unwrap().then(a.trial.cmp(&b.trial)));

    let mut groups: BTreeMap<(usize, usize), Vec<&ResultRow>> = BTreeMap::new();
    for row in &rows {
        let k = strategies.iter().position(|s| s.parameter() == row.alpha).unwrap_or(0);
        groups.entry((row.m, k)).or_default().push(row);
    }
    let mut summary: Vec<SummaryRow> = groups
        .into_values()
        .map(|g| {
            let finite = |v: f64| v.is_finite();
            SummaryRow {
                m: g[0].m,
                alpha: g[0].alpha,
                trials: g.len(),
                converged: g.iter().filter(|r| r.converged).count(),
                geomean_linf_error: geomean(g.iter().map(|r| r.linf_error).filter(|v| finite(*v))),
                geomean_l2_coeff_error: g
                    .iter()
                    .all(|r| r.l2_coeff_error.is_some())
                    .then(|| geomean(g.iter().filter_map(|r| r.l2_coeff_error))),
            }
        })
        .collect();
    summary.sort_by(|a, b| order(a.m, a.alpha).partial_cmp(&order(b.m, b.alpha)).unwrap());

    Ok(ExperimentOutput {
        config_hash: hash,
        rows,
        summary,
        failures,
        grid_description: reference.grid.description().to_string(),
    })
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:e}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

#[derive(Serialize)]
struct Meta<'a> {
    config: &'a ExperimentConfig,
    config_hash: &'a str,
    code_version: &'static str,
    rng: &'static str,
    trial_seeds: &'static str,
    noise_model: &'static str,
    solver_opts: &'a SolverOptions,
    error_grid: &'a str,
    rows: usize,
    failures: &'a [TrialFailure],
}

/// Writes `results.csv`, `summary.csv`, `meta.json` and `timings.csv` into
/// `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, config: &ExperimentConfig, out: &ExperimentOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("results.csv"))?;
    w.write_record(RESULTS_HEADER)?;
    for r in &out.rows {
        w.write_record([
            r.config_hash.clone(),
            r.m.to_string(),
            r.trial.to_string(),
            fmt_opt(r.alpha),
            fmt_f64(r.linf_error),
            fmt_opt(r.l2_coeff_error),
            fmt_f64(r.residual),
            r.iterations.to_string(),
            r.converged.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
    w.write_record(SUMMARY_HEADER)?;
    for s in &out.summary {
        w.write_record([
            s.m.to_string(),
            fmt_opt(s.alpha),
            s.trials.to_string(),
            s.converged.to_string(),
            fmt_f64(s.geomean_linf_error),
            fmt_opt(s.geomean_l2_coeff_error),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("timings.csv"))?;
    w.write_record(["m", "trial", "alpha", "wall_time_ms"])?;
    for r in &out.rows {
        w.write_record([r.m.to_string(), r.trial.to_string(), fmt_opt(r.alpha), format!("{:.3}", r.wall_time_ms)])?;
    }
    w.flush()?;

    let meta = Meta {
        config,
        config_hash: &out.config_hash,
        code_version: env!("CARGO_PKG_VERSION"),
        rng: crate::measurement::RNG_NAME,
        trial_seeds: "splitmix64 chain over (base_seed, m, alpha bits, trial)",
        noise_model: "uniform on the sphere of radius eta",
        solver_opts: &config.solver_opts,
        error_grid: &out.grid_description,
        rows: out.rows.len(),
        failures: &out.failures,
    };
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}
