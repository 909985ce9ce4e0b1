//! Weighted basis pursuit denoising
//!
//! ```text
//! minimize  sum_i w_i |z_i|   subject to  ||A z - y|| <= eta
//! ```
//!
//! [`solve_weighted_bpdn`] substitutes `v = W z`, which turns the problem
//! into unweighted basis pursuit denoising with matrix `B = A W^{-1}`. It
//! runs a first-order primal-dual (Chambolle–Pock) iteration with adaptive
//! step balancing on that problem. Whenever the sign pattern of the iterate
//! changes, a polishing step solves the problem restricted to the current
//! support in closed form and checks it against a dual certificate. A result
//! is reported as converged only when the duality gap and feasibility
//! violation are both within tolerance.
//!
//! [`solve_lp_oracle`] is an independent simplex solver for the equality
//! constrained case, used to verify the first-order solver on small problems.

mod lp;
mod pdhg;
mod polish;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::MeasurementSystem;
use crate::weights::WeightVector;

pub use lp::{solve_lp_oracle, LP_ORACLE_MAX_N};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Relative duality-gap tolerance, `gap <= obj_tol * (1 + objective)`.
    pub obj_tol: f64,
    /// Absolute tolerance on `||A z - y|| - eta`.
    pub feas_tol: f64,
    pub max_iters: usize,
    /// Power iterations used to estimate `||A W^{-1}||`.
    pub power_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { obj_tol: 1e-8, feas_tol: 1e-9, max_iters: 100_000, power_iters: 50 }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        let ok = self.obj_tol > 0.0 && self.feas_tol > 0.0 && self.max_iters > 0 && self.power_iters > 0;
        if ok && self.obj_tol.is_finite() && self.feas_tol.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid solver options {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub coefficients: Vec<f64>,
    /// `||x||_{1,w}`
    pub objective: f64,
    /// `||A x - y||`
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Primal objective minus the dual objective of `dual`.
    pub kkt_gap: f64,
    /// Dual certificate `lambda` with `|A^T lambda|_i <= w_i`; its dual
    /// objective is `<lambda, y> - eta ||lambda||`.
    pub dual: Vec<f64>,
}

fn check_finite(what: &'static str, mut it: impl Iterator<Item = f64>) -> Result<()> {
    if it.all(f64::is_finite) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub(crate) fn validate_problem(a: &DMatrix<f64>, y: &DVector<f64>, weights: &WeightVector, eta: f64) -> Result<()> {
    if y.len() != a.nrows() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), found: y.len() });
    }
    if weights.len() != a.ncols() {
        return Err(Error::MissingWeight { expected: a.ncols(), found: weights.len() });
    }
    check_finite("measurement matrix", a.iter().copied())?;
    check_finite("data vector", y.iter().copied())?;
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(Error::InvalidParameter(format!("eta must be finite and nonnegative, got {eta}")));
    }
    Ok(())
}

/// `sum_i a_i b_i` with the error-free product and sum transformations,
/// accurate to about twice working precision.
pub(crate) fn dot2(a: impl Iterator<Item = f64>, b: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for (x, y) in a.zip(b) {
        let p = x * y;
        let pe = x.mul_add(y, -p);
        let t = s + p;
        let z = t - s;
        let se = (s - (t - z)) + (p - z);
        s = t;
        c += pe + se;
    }
    s + c
}

/// Dual objective of `mu` after scaling it into the feasible set
/// `|A^T mu|_i <= w_i`. Returns the scaled vector and its value.
pub(crate) fn feasible_dual(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &[f64],
    eta: f64,
    mut mu: DVector<f64>,
) -> (DVector<f64>, f64) {
    // compensated products: optimal duals can be large along near-null
    // directions of A^T, where plain dot products cancel badly
    let ratio = a
        .column_iter()
        .zip(w)
        .map(|(col, wi)| dot2(col.iter().copied(), mu.iter().copied()).abs() / wi)
        .fold(0.0, f64::max);
    if ratio > 1.0 {
        mu /= ratio;
    }
    let value = dot2(mu.iter().copied(), y.iter().copied()) - eta * mu.norm();
    (mu, value)
}

/// Solves `min ||z||_{1,w}` subject to `||A z - y|| <= eta`.
///
/// `eta` is the radius of the constraint ball in the normalized scaling of
/// `A` and `y`, i.e. `eta / sqrt(m)` for a measurement system with raw noise
/// level `eta`. An iteration cap yields `converged = false` with the best
/// available iterate rather than an error.
pub fn solve_weighted_bpdn(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    weights: &WeightVector,
    eta: f64,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    opts.validate()?;
    validate_problem(a, y, weights, eta)?;
    let n = a.ncols();
    if y.norm() <= eta {
        return Ok(SolveResult {
            coefficients: vec![0.0; n],
            objective: 0.0,
            residual_norm: y.norm(),
            iterations: 0,
            converged: true,
            kkt_gap: 0.0,
            dual: vec![0.0; y.len()],
        });
    }
    if eta == 0.0 {
        ensure_in_range(a, y, opts.feas_tol)?;
    }
    pdhg::solve(a, y, weights.values(), eta, opts)
}

/// Fails with [`Error::Infeasible`] when `y` has a component outside the
/// numerical column space of `a`.
fn ensure_in_range(a: &DMatrix<f64>, y: &DVector<f64>, feas_tol: f64) -> Result<()> {
    let (m, n) = a.shape();
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("requested left singular vectors");
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return Err(Error::Infeasible);
    }
    let tol = smax * (m.max(n) as f64) * f64::EPSILON;
    let mut proj = DVector::zeros(m);
    for (k, s) in svd.singular_values.iter().enumerate() {
        if *s > tol {
            let col = u.column(k);
            proj += col * col.dot(y);
        }
    }
    if (y - proj).norm() > feas_tol.max(1e-10 * y.norm()) {
        return Err(Error::Infeasible);
    }
    Ok(())
}

/// True iff the expansion with coefficients `result.coefficients` matches
/// `f` at every sample point of `system` to within `tol`.
pub fn check_interpolation<F>(result: &SolveResult, system: &MeasurementSystem, f: F, tol: f64) -> Result<bool>
where
    F: Fn(&[f64]) -> f64,
{
    Ok(interpolation_defect(result, system, f)? <= tol)
}

/// `max_i |f~(t_i) - f(t_i)|` over the sample points.
pub fn interpolation_defect<F>(result: &SolveResult, system: &MeasurementSystem, f: F) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    if result.coefficients.len() != system.n() {
        return Err(Error::DimensionMismatch { expected: system.n(), found: result.coefficients.len() });
    }
    let values = crate::reconstruction::evaluate_expansion(
        &result.coefficients,
        system.spec(),
        system.index_set(),
        system.samples().points(),
    )?;
    Ok(system.samples().points().iter().zip(values).map(|(p, v)| (v - f(p.coords())).abs()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use rand_distr::StandardNormal;

    fn gaussian(m: usize, n: usize, rng: &mut ChaCha20Rng) -> DMatrix<f64> {
        DMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal) / (m as f64).sqrt())
    }

    fn sparse_instance(m: usize, n: usize, s: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let a = gaussian(m, n, &mut rng);
        let mut x = DVector::zeros(n);
        let mut placed = 0;
        while placed < s {
            let k = rng.random_range(0..n);
            if x[k] == 0.0 {
                x[k] = rng.sample::<f64, _>(StandardNormal);
                placed += 1;
            }
        }
        let y = &a * &x;
        (a, y, x)
    }

    #[test]
    fn zero_data_gives_zero() {
        let (a, _, _) = sparse_instance(8, 20, 2, 1);
        let y = DVector::zeros(8);
        for eta in [0.0, 0.5] {
            let r = solve_weighted_bpdn(&a, &y, &WeightVector::unit(20), eta, &SolverOptions::default()).unwrap();
            assert!(r.converged);
            assert!(r.coefficients.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn identity_equality_returns_data() {
        let a = DMatrix::identity(6, 6);
        let y = DVector::from_vec(vec![1.0, -2.0, 0.0, 0.5, 3.0, -0.25]);
        let r = solve_weighted_bpdn(&a, &y, &WeightVector::unit(6), 0.0, &SolverOptions::default()).unwrap();
        assert!(r.converged);
        for (x, t) in r.coefficients.iter().zip(y.iter()) {
            assert!((x - t).abs() < 1e-9);
        }
    }

    #[test]
    fn recovers_sparse_vector_and_certificate() {
        let (a, y, x) = sparse_instance(25, 60, 3, 7);
        let w = WeightVector::unit(60);
        let r = solve_weighted_bpdn(&a, &y, &w, 0.0, &SolverOptions::default()).unwrap();
        assert!(r.converged, "{r:?}");
        let err: f64 = r.coefficients.iter().zip(x.iter()).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        assert!(err < 1e-8, "err = {err}");
        // KKT: |A^T lambda| <= w and equality with sign on the support
        let lam = DVector::from_vec(r.dual.clone());
        let atl = a.tr_mul(&lam);
        for j in 0..60 {
            assert!(atl[j].abs() <= 1.0 + 1e-6);
            if r.coefficients[j].abs() > 1e-9 {
                assert!((atl[j] - r.coefficients[j].signum()).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn noisy_constraint_is_active_and_feasible() {
        let (a, y, _) = sparse_instance(30, 80, 4, 3);
        let w = WeightVector::custom((0..80).map(|i| 1.0 + (i % 5) as f64 * 0.5).collect()).unwrap();
        let eta = 0.05 * y.norm();
        let r = solve_weighted_bpdn(&a, &y, &w, eta, &SolverOptions::default()).unwrap();
        assert!(r.converged, "{r:?}");
        assert!(r.residual_norm <= eta + 1e-9);
        assert!((r.residual_norm - eta).abs() < 1e-7);
        assert!(r.kkt_gap <= 1e-8 * (1.0 + r.objective));
    }

    #[test]
    fn weight_scaling_leaves_minimizer() {
        let (a, y, _) = sparse_instance(15, 40, 3, 21);
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let w = WeightVector::custom((0..40).map(|_| rng.random_range(0.5..4.0)).collect()).unwrap();
        let r1 = solve_weighted_bpdn(&a, &y, &w, 0.0, &SolverOptions::default()).unwrap();
        let r2 = solve_weighted_bpdn(&a, &y, &w.scaled(7.5).unwrap(), 0.0, &SolverOptions::default()).unwrap();
        let diff: f64 = r1.coefficients.iter().zip(&r2.coefficients).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        assert!(diff < 1e-6, "diff = {diff}");
        assert!((r2.objective - 7.5 * r1.objective).abs() < 1e-6 * r2.objective);
    }

    #[test]
    fn objective_monotone_in_eta() {
        let (a, y, _) = sparse_instance(20, 50, 6, 5);
        let w = WeightVector::unit(50);
        let ny = y.norm();
        let objs: Vec<f64> = [0.0, 0.01, 0.1, 0.3]
            .iter()
            .map(|f| solve_weighted_bpdn(&a, &y, &w, f * ny, &SolverOptions::default()).unwrap().objective)
            .collect();
        for p in objs.windows(2) {
            assert!(p[0] >= p[1] - 1e-9, "{objs:?}");
        }
    }

    #[test]
    fn infeasible_and_bad_input() {
        // two identical rows with different data: y outside the range
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, 2.0]);
        let w = WeightVector::unit(3);
        assert!(matches!(solve_weighted_bpdn(&a, &y, &w, 0.0, &SolverOptions::default()), Err(Error::Infeasible)));
        // the same data become feasible once eta covers the inconsistency
        let r = solve_weighted_bpdn(&a, &y, &w, 0.75, &SolverOptions::default()).unwrap();
        assert!(r.residual_norm <= 0.75 + 1e-9);

        let mut bad = a.clone();
        bad[(0, 0)] = f64::NAN;
        assert!(matches!(solve_weighted_bpdn(&bad, &y, &w, 0.0, &SolverOptions::default()), Err(Error::NonFinite(_))));
        assert!(solve_weighted_bpdn(&a, &y, &WeightVector::unit(2), 0.0, &SolverOptions::default()).is_err());
        assert!(solve_weighted_bpdn(&a, &y, &w, -1.0, &SolverOptions::default()).is_err());
    }

    #[test]
    fn iteration_cap_reports_unconverged() {
        let (a, y, _) = sparse_instance(20, 60, 10, 9);
        let opts = SolverOptions { max_iters: 3, ..SolverOptions::default() };
        let r = solve_weighted_bpdn(&a, &y, &WeightVector::unit(60), 0.0, &opts).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
    }
}
