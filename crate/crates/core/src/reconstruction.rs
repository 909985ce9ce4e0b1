//! Sample, solve and measure the error of a function reconstruction.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index_sets::IndexSet;
use crate::measurement::{coordinate_tables, draw_samples, MeasurementSystem, NoiseModel};
use crate::poly_basis::{BasisSpec, Point};
use crate::quadrature::GaussRule;
use crate::solver::{interpolation_defect, solve_weighted_bpdn, SolveResult, SolverOptions};
use crate::weights::WeightVector;

/// Largest tensor quadrature grid the coefficient oracle will evaluate.
pub const QUADRATURE_BUDGET: u128 = 100_000_000;
/// Dimension from which the coefficient oracle is skipped.
pub const ORACLE_MAX_DIMENSION: usize = 4;
pub const ERROR_GRID_SEED: u64 = 0x6121D;
pub const ERROR_GRID_RANDOM_POINTS: usize = 10_000;

type Evaluator = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A named function on `(-1, 1)^d`.
#[derive(Clone)]
pub struct TargetFunction {
    id: String,
    dimension: usize,
    evaluator: Arc<Evaluator>,
}

impl fmt::Debug for TargetFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetFunction").field("id", &self.id).field("dimension", &self.dimension).finish()
    }
}

impl TargetFunction {
    pub fn new(
        id: impl Into<String>,
        dimension: usize,
        evaluator: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        TargetFunction { id: id.into(), dimension, evaluator: Arc::new(evaluator) }
    }

    /// The finite expansion `sum_i c_i phi_i`.
    pub fn expansion(
        id: impl Into<String>,
        spec: BasisSpec,
        index_set: IndexSet,
        coefficients: Vec<f64>,
    ) -> Result<Self> {
        if coefficients.len() != index_set.len() {
            return Err(Error::DimensionMismatch { expected: index_set.len(), found: coefficients.len() });
        }
        let d = spec.dimension();
        let max_degree = index_set.max_degree() as usize;
        Ok(Self::new(id, d, move |t: &[f64]| {
            expansion_at(&coefficients, &spec, &index_set, max_degree, t, &mut Vec::new())
        }))
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn eval(&self, t: &[f64]) -> f64 {
        (self.evaluator)(t)
    }

    pub fn as_fn(&self) -> impl Fn(&[f64]) -> f64 + '_ {
        move |t| self.eval(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// Largest `|f - f~|` over the error grid.
    pub linf_error: f64,
    /// `||x_oracle - x^||_2` on the index set; absent when the oracle is skipped.
    pub l2_coeff_error: Option<f64>,
    pub residual: f64,
    /// Largest `|f~ - f|` over the sample points.
    pub interpolation_defect: f64,
}

fn expansion_at(
    coefficients: &[f64],
    spec: &BasisSpec,
    index_set: &IndexSet,
    max_degree: usize,
    t: &[f64],
    table: &mut Vec<f64>,
) -> f64 {
    let stride = max_degree + 1;
    coordinate_tables(spec, t, max_degree, table);
    index_set
        .iter()
        .zip(coefficients)
        .filter(|(_, c)| **c != 0.0)
        .map(|(idx, c)| {
            c * idx.entries().iter().enumerate().map(|(j, &k)| table[j * stride + k as usize]).product::<f64>()
        })
        .sum()
}

/// `sum_i c_i phi_i(t)` at every point.
pub fn evaluate_expansion(
    coefficients: &[f64],
    spec: &BasisSpec,
    index_set: &IndexSet,
    points: &[Point],
) -> Result<Vec<f64>> {
    if coefficients.len() != index_set.len() {
        return Err(Error::DimensionMismatch { expected: index_set.len(), found: coefficients.len() });
    }
    if index_set.dimension() != spec.dimension() {
        return Err(Error::DimensionMismatch { expected: spec.dimension(), found: index_set.dimension() });
    }
    if let Some(p) = points.iter().find(|p| p.dimension() != spec.dimension()) {
        return Err(Error::DimensionMismatch { expected: spec.dimension(), found: p.dimension() });
    }
    let max_degree = index_set.max_degree() as usize;
    Ok(points
        .par_iter()
        .map_init(Vec::new, |table, p| expansion_at(coefficients, spec, index_set, max_degree, p.coords(), table))
        .collect())
}

/// Default oracle quadrature order for an index set.
pub fn default_quad_order(index_set: &IndexSet) -> usize {
    2 * index_set.max_degree() as usize + 16
}

/// Coefficients `<f, phi_i>` by tensor Gauss quadrature of order
/// `quad_order` per axis, contracted one axis at a time.
pub fn oracle_coefficients(
    f: &TargetFunction,
    spec: &BasisSpec,
    index_set: &IndexSet,
    quad_order: Option<usize>,
) -> Result<Vec<f64>> {
    let d = spec.dimension();
    if f.dimension() != d {
        return Err(Error::DimensionMismatch { expected: d, found: f.dimension() });
    }
    if index_set.dimension() != d {
        return Err(Error::DimensionMismatch { expected: d, found: index_set.dimension() });
    }
    let kmax = index_set.max_degree() as usize;
    let n = quad_order.unwrap_or_else(|| default_quad_order(index_set));
    if n < kmax + 1 {
        return Err(Error::InvalidParameter(format!("quadrature order {n} is below max degree + 1 = {}", kmax + 1)));
    }
    let nodes = (n as u128).checked_pow(d as u32).unwrap_or(u128::MAX);
    if nodes > QUADRATURE_BUDGET {
        return Err(Error::QuadratureBudget { nodes, cap: QUADRATURE_BUDGET });
    }
    let rule = GaussRule::for_family(spec.family(), n);
    let total = nodes as usize;
    let mut values: Vec<f64> = (0..total)
        .into_par_iter()
        .map_init(
            || vec![0.0; d],
            |t, flat| {
                let mut rem = flat;
                for j in (0..d).rev() {
                    t[j] = rule.nodes[rem % n];
                    rem /= n;
                }
                f.eval(t)
            },
        )
        .collect();
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Evaluation(format!("non-finite value {v} at a quadrature node")));
    }
    // weighted basis table: wphi[q * (kmax + 1) + k] = w_q phi_k(x_q)
    let stride = kmax + 1;
    let mut wphi = vec![0.0; n * stride];
    for q in 0..n {
        crate::poly_basis::univariate_table(spec.family(), rule.nodes[q], &mut wphi[q * stride..(q + 1) * stride]);
        for v in &mut wphi[q * stride..(q + 1) * stride] {
            *v *= rule.weights[q];
        }
    }
    // contract the leading axis and move its degree axis to the back
    let mut rest = total / n;
    let mut done = 1usize;
    for _ in 0..d {
        let mut out = vec![0.0; rest * done * stride];
        // layout before: [n, rest, done]; after: [rest, done, stride]
        let inner = rest * done;
        out.par_chunks_mut(stride).enumerate().for_each(|(r, chunk)| {
            for q in 0..n {
                let v = values[q * inner + r];
                if v != 0.0 {
                    let row = &wphi[q * stride..(q + 1) * stride];
                    for (o, p) in chunk.iter_mut().zip(row) {
                        *o += v * p;
                    }
                }
            }
        });
        // `out` is [rest, done, stride]; the new trailing block is done * stride
        values = out;
        done *= stride;
        rest /= n;
    }
    // after d steps the layout is [stride; d] with axis 0 slowest
    Ok(index_set
        .iter()
        .map(|idx| {
            let flat = idx.entries().iter().fold(0usize, |acc, &k| acc * stride + k as usize);
            values[flat]
        })
        .collect())
}

/// Fixed points on which reconstruction errors are measured.
#[derive(Debug, Clone)]
pub struct ErrorGrid {
    points: Vec<Point>,
    description: String,
}

impl ErrorGrid {
    /// `random` seeded uniform points, plus a tensor grid of Chebyshev points
    /// with `tensor_per_axis` points per axis when `d <= 2`.
    pub fn new(d: usize, random: usize, tensor_per_axis: usize, seed: u64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut points = Vec::with_capacity(random);
        while points.len() < random {
            let t: Vec<f64> = (0..d).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
            if let Ok(p) = Point::new(t) {
                points.push(p);
            }
        }
        let tensor = if d <= 2 { tensor_per_axis } else { 0 };
        if tensor > 0 {
            let axis: Vec<f64> =
                (0..tensor).map(|k| (std::f64::consts::PI * (k as f64 + 0.5) / tensor as f64).cos()).collect();
            let count = tensor.pow(d as u32);
            for flat in 0..count {
                let mut rem = flat;
                let t: Vec<f64> = (0..d)
                    .map(|_| {
                        let v = axis[rem % tensor];
                        rem /= tensor;
                        v
                    })
                    .collect();
                points.push(Point::new(t)?);
            }
        }
        let description = format!(
            "{random} uniform points (ChaCha20 seed {seed}){}",
            if tensor > 0 { format!(" + {tensor}^{d} Chebyshev tensor points") } else { String::new() }
        );
        Ok(ErrorGrid { points, description })
    }

    /// The grid used by [`reconstruct`].
    pub fn standard(d: usize) -> Result<Self> {
        let per_axis = if d == 1 { 4000 } else { 100 };
        Self::new(d, ERROR_GRID_RANDOM_POINTS, per_axis, ERROR_GRID_SEED)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn description(&self) -> &str {
        &self.description
    }
}

/// Quantities shared by every trial on the same function and index set.
#[derive(Debug, Clone)]
pub struct Reference {
    pub oracle: Option<Vec<f64>>,
    pub grid: ErrorGrid,
    pub grid_values: Vec<f64>,
}

impl Reference {
    /// Computes the oracle coefficients (when `d <= 4`) and grid values.
    pub fn build(f: &TargetFunction, spec: &BasisSpec, index_set: &IndexSet, grid: ErrorGrid) -> Result<Self> {
        let oracle = if spec.dimension() <= ORACLE_MAX_DIMENSION {
            Some(oracle_coefficients(f, spec, index_set, None)?)
        } else {
            None
        };
        let grid_values: Vec<f64> = grid.points().par_iter().map(|p| f.eval(p.coords())).collect();
        if grid_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Evaluation(format!("{} is not finite on the error grid", f.id())));
        }
        Ok(Reference { oracle, grid, grid_values })
    }
}

fn noise_seed(seed: u64) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15
}

/// Draws `m` samples with `seed`, solves the weighted problem and reports
/// errors against `f`.
#[allow(clippy::too_many_arguments)]
pub fn reconstruct(
    f: &TargetFunction,
    spec: &BasisSpec,
    index_set: &IndexSet,
    weights: &WeightVector,
    m: usize,
    eta: f64,
    seed: u64,
    opts: &SolverOptions,
) -> Result<(SolveResult, ErrorReport)> {
    let reference = Reference::build(f, spec, index_set, ErrorGrid::standard(spec.dimension())?)?;
    reconstruct_with(f, spec, index_set, weights, m, eta, seed, opts, &reference)
}

/// [`reconstruct`] with a precomputed [`Reference`].
#[allow(clippy::too_many_arguments)]
pub fn reconstruct_with(
    f: &TargetFunction,
    spec: &BasisSpec,
    index_set: &IndexSet,
    weights: &WeightVector,
    m: usize,
    eta: f64,
    seed: u64,
    opts: &SolverOptions,
    reference: &Reference,
) -> Result<(SolveResult, ErrorReport)> {
    if f.dimension() != spec.dimension() {
        return Err(Error::DimensionMismatch { expected: spec.dimension(), found: f.dimension() });
    }
    let samples = draw_samples(spec, m, seed)?;
    let system =
        MeasurementSystem::build(samples, index_set.clone(), f.as_fn(), eta, NoiseModel::Sphere, noise_seed(seed))?;
    let result = solve_weighted_bpdn(system.matrix(), system.data(), weights, system.noise_level(), opts)?;
    let approx = evaluate_expansion(&result.coefficients, spec, index_set, reference.grid.points())?;
    let linf_error = approx.iter().zip(&reference.grid_values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let l2_coeff_error = reference
        .oracle
        .as_ref()
        .map(|x| (DVector::from_column_slice(x) - DVector::from_column_slice(&result.coefficients)).norm());
    let report = ErrorReport {
        linf_error,
        l2_coeff_error,
        residual: result.residual_norm,
        interpolation_defect: interpolation_defect(&result, &system, f.as_fn())?,
    };
    Ok((result, report))
}

/// Writes one row per index: the multi-index entries, then the coefficient.
pub fn write_coefficients_csv(path: &Path, index_set: &IndexSet, coefficients: &[f64]) -> Result<()> {
    if coefficients.len() != index_set.len() {
        return Err(Error::DimensionMismatch { expected: index_set.len(), found: coefficients.len() });
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (1..=index_set.dimension()).map(|j| format!("i{j}")).collect();
    header.push("value".into());
    w.write_record(&header)?;
    for (idx, c) in index_set.iter().zip(coefficients) {
        let mut row: Vec<String> = idx.entries().iter().map(|k| k.to_string()).collect();
        row.push(format!("{c:e}"));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Serializes an [`ErrorReport`] as pretty JSON.
pub fn write_error_report(path: &Path, report: &ErrorReport) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut file, report)?;
    file.write_all(b"\n")?;
    Ok(())
}
