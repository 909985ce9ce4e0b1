//! Dense two-phase simplex for
//!
//! ```text
//! minimize  sum_i w_i (p_i + q_i)   subject to  A (p - q) = y,  p, q >= 0
//! ```
//!
//! Pricing is Dantzig's rule, switching to Bland's rule during long runs of
//! degenerate pivots. The ratio test is Harris' two-pass test with a pivot
//! tolerance relative to the column. The tableau is periodically recomputed
//! from the original data through an LU factorization of the basis, with the
//! basic values and duals refined by compensated residuals. A few dual simplex
//! pivots at the end remove basic values that refinement shows to be
//! negative. Artificial columns stay in the tableau (barred from re-entering)
//! so the final objective row carries the dual solution.

use nalgebra::{DMatrix, DVector};

use super::{dot2, validate_problem, SolveResult};
use crate::error::{Error, Result};
use crate::weights::WeightVector;

/// Largest number of unknowns the oracle accepts.
pub const LP_ORACLE_MAX_N: usize = 200;

const PIVOT_TOL: f64 = 1e-11;
const PIVOT_REL_TOL: f64 = 1e-7;
const FEAS_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const CLEANUP_TOL: f64 = 1e-13;
const CLEANUP_ROUNDS: usize = 6;
const REFINE_STEPS: usize = 2;
const DEGENERATE_RUN_LIMIT: usize = 50;
const REINVERT_EVERY: usize = 64;

struct Tableau {
    rows: usize,
    /// structural + artificial columns, then the right-hand side
    width: usize,
    data: Vec<f64>,
    /// constraint rows as first written, `rows x width`
    orig: DMatrix<f64>,
    cost: Vec<f64>,
    basis: Vec<usize>,
    pivots: usize,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.width - 1)
    }

    /// Objective row lives at index `rows`.
    fn obj(&self, c: usize) -> f64 {
        self.at(self.rows, c)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width;
        let p = self.data[pr * w + pc];
        for c in 0..w {
            self.data[pr * w + c] /= p;
        }
        for r in 0..=self.rows {
            if r == pr {
                continue;
            }
            let f = self.data[r * w + pc];
            if f != 0.0 {
                for c in 0..w {
                    self.data[r * w + c] -= f * self.data[pr * w + c];
                }
            }
        }
        self.basis[pr] = pc;
        self.pivots += 1;
    }

    /// Rebuilds every row from `orig`, `cost` and the current basis. The
    /// basic values and the duals behind the objective row are refined with
    /// compensated residuals, since pricing and cleanup decisions hinge on
    /// their signs.
    fn reinvert(&mut self) -> bool {
        let (m, w) = (self.rows, self.width);
        let b = basis_matrix(self);
        let lu = b.clone().lu();
        let Some(t) = lu.solve(&self.orig) else { return false };
        if t.iter().any(|v| !v.is_finite()) {
            return false;
        }
        for r in 0..m {
            for c in 0..w {
                self.data[r * w + c] = t[(r, c)];
            }
        }
        let mut xb = t.column(w - 1).into_owned();
        refine_primal(&b, &lu, &self.orig.column(w - 1).into_owned(), &mut xb);
        for r in 0..m {
            self.data[r * w + w - 1] = xb[r];
        }
        let cb = DVector::from_iterator(m, self.basis.iter().map(|&c| self.cost[c]));
        let lut = b.transpose().lu();
        let Some(mut mu) = lut.solve(&cb) else { return false };
        refine_primal(&b.transpose(), &lut, &cb, &mut mu);
        for c in 0..w {
            let col = self.orig.column(c);
            self.data[m * w + c] = dot2(col.iter().copied().chain([1.0]), mu.iter().map(|v| -v).chain([self.cost[c]]));
        }
        true
    }

    fn set_cost(&mut self, cost: Vec<f64>) {
        self.cost = cost;
        self.reinvert();
    }

    /// Harris two-pass ratio test: bound the step with every basic variable
    /// allowed to go `FEAS_TOL` negative, then take the largest pivot among
    /// rows within that bound (the smallest basic index under Bland's rule).
    fn ratio_test(&self, pc: usize, active: &[bool], bland: bool) -> Option<(usize, f64)> {
        let rows = || (0..self.rows).filter(|&r| active[r]);
        let amax = rows().map(|r| self.at(r, pc).abs()).fold(0.0, f64::max);
        let ptol = PIVOT_TOL.max(PIVOT_REL_TOL * amax);
        let bound = rows()
            .filter(|&r| self.at(r, pc) > ptol)
            .map(|r| (self.rhs(r).max(0.0) + FEAS_TOL) / self.at(r, pc))
            .fold(f64::INFINITY, f64::min);
        if !bound.is_finite() {
            return None;
        }
        let within = rows().filter(|&r| self.at(r, pc) > ptol && self.rhs(r).max(0.0) / self.at(r, pc) <= bound);
        let pr = if bland {
            within.min_by_key(|&r| self.basis[r])
        } else {
            within.max_by(|&i, &j| self.at(i, pc).total_cmp(&self.at(j, pc)))
        }?;
        Some((pr, self.rhs(pr).max(0.0) / self.at(pr, pc)))
    }

    /// Dual simplex pivots on the most negative basic variable until the
    /// basis is primal feasible. Returns the number of pivots made.
    fn dual_cleanup(&mut self, allowed: usize, active: &[bool]) -> Result<usize> {
        let mut made = 0;
        loop {
            let leaving = (0..self.rows)
                .filter(|&r| active[r] && self.rhs(r) < -CLEANUP_TOL)
                .min_by(|&i, &j| self.rhs(i).total_cmp(&self.rhs(j)));
            let Some(pr) = leaving else { return Ok(made) };
            let amax = (0..allowed).map(|c| self.at(pr, c).abs()).fold(0.0, f64::max);
            let ptol = PIVOT_TOL.max(PIVOT_REL_TOL * amax);
            let entering = (0..allowed).filter(|&c| self.at(pr, c) < -ptol).min_by(|&i, &j| {
                let ri = self.obj(i).max(0.0) / -self.at(pr, i);
                let rj = self.obj(j).max(0.0) / -self.at(pr, j);
                ri.total_cmp(&rj)
            });
            let Some(pc) = entering else { return Err(Error::Infeasible) };
            self.pivot(pr, pc);
            made += 1;
            if made > 4 * self.rows {
                return Err(Error::InvalidParameter("dual cleanup did not terminate".into()));
            }
            if self.pivots.is_multiple_of(REINVERT_EVERY) {
                self.reinvert();
            }
        }
    }

    /// Pivots on columns `< allowed` until optimal. Reduced costs are
    /// compared relative to `scale[c]`.
    fn optimize(&mut self, allowed: usize, active: &[bool], scale: &[f64]) -> Result<()> {
        let cap = 50 * (self.rows + self.width);
        let mut degenerate_run = 0usize;
        let priced = |t: &Self, c: usize| t.obj(c) / scale[c];
        loop {
            let bland = degenerate_run >= DEGENERATE_RUN_LIMIT;
            let entering = if bland {
                (0..allowed).find(|&c| priced(self, c) < -OPT_TOL)
            } else {
                (0..allowed)
                    .filter(|&c| priced(self, c) < -OPT_TOL)
                    .min_by(|&i, &j| priced(self, i).total_cmp(&priced(self, j)))
            };
            let Some(pc) = entering else { return Ok(()) };
            let Some((pr, ratio)) = self.ratio_test(pc, active, bland) else {
                // costs are positive, so an unbounded ray indicates breakdown
                return Err(Error::InvalidParameter("simplex found an unbounded ray".into()));
            };
            degenerate_run = if ratio <= PIVOT_TOL { degenerate_run + 1 } else { 0 };
            self.pivot(pr, pc);
            if self.pivots.is_multiple_of(REINVERT_EVERY) {
                self.reinvert();
            }
            if self.pivots > cap {
                return Err(Error::InvalidParameter(format!("simplex exceeded {cap} pivots")));
            }
        }
    }
}

/// Exact weighted basis pursuit `min ||z||_{1,w}  s.t.  A z = y` by simplex.
pub fn solve_lp_oracle(a: &DMatrix<f64>, y: &DVector<f64>, weights: &WeightVector) -> Result<SolveResult> {
    validate_problem(a, y, weights, 0.0)?;
    let n = a.ncols();
    if n > LP_ORACLE_MAX_N {
        return Err(Error::SizeCap { what: "LP oracle", size: n, cap: LP_ORACLE_MAX_N });
    }
    let (x, dual, pivots) = simplex(a, y, weights.values())?;
    let objective = weights.weighted_l1(x.as_slice());
    Ok(SolveResult {
        residual_norm: (a * &x - y).norm(),
        coefficients: x.iter().copied().collect(),
        objective,
        iterations: pivots,
        converged: true,
        kkt_gap: objective - dual.dot(y),
        dual: dual.iter().copied().collect(),
    })
}

/// Primal solution, equality dual and pivot count.
pub(super) fn simplex(a: &DMatrix<f64>, y: &DVector<f64>, w: &[f64]) -> Result<(DVector<f64>, DVector<f64>, usize)> {
    let (m, n) = a.shape();
    let nstruct = 2 * n;
    let width = nstruct + m + 1;
    let sign: Vec<f64> = y.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
    let orig = DMatrix::from_fn(m, width, |r, c| {
        if c < n {
            sign[r] * a[(r, c)]
        } else if c < nstruct {
            -sign[r] * a[(r, c - n)]
        } else if c == width - 1 {
            sign[r] * y[r]
        } else {
            (c - nstruct == r) as u8 as f64
        }
    });
    let mut t = Tableau {
        rows: m,
        width,
        data: vec![0.0; (m + 1) * width],
        orig,
        cost: Vec::new(),
        basis: (nstruct..nstruct + m).collect(),
        pivots: 0,
    };
    // phase one: minimize the sum of artificials
    t.set_cost((0..width).map(|c| (c >= nstruct && c < width - 1) as u8 as f64).collect());
    let mut active = vec![true; m];
    let ynorm = y.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    t.optimize(nstruct, &active, &vec![ynorm; nstruct])?;
    t.reinvert();
    if -t.obj(width - 1) > 1e-9 * ynorm {
        return Err(Error::Infeasible);
    }
    // drive remaining artificials out; rows where that fails are redundant
    for r in 0..m {
        if t.basis[r] >= nstruct {
            let best = (0..nstruct).max_by(|&i, &j| t.at(r, i).abs().total_cmp(&t.at(r, j).abs()));
            match best {
                Some(c) if t.at(r, c).abs() > 1e-9 => t.pivot(r, c),
                _ => active[r] = false,
            }
        }
    }
    let wscale: Vec<f64> = (0..nstruct).map(|c| w[c % n]).collect();
    t.set_cost((0..width).map(|c| if c < nstruct { w[c % n] } else { 0.0 }).collect());
    // stop once a pass over freshly refined rows changes nothing
    for _ in 0..CLEANUP_ROUNDS {
        let before = t.pivots;
        t.optimize(nstruct, &active, &wscale)?;
        t.reinvert();
        if t.dual_cleanup(nstruct, &active)? > 0 {
            t.reinvert();
        } else if t.pivots == before {
            break;
        }
    }
    let mut x = DVector::zeros(n);
    for r in (0..m).filter(|&r| active[r]) {
        let c = t.basis[r];
        let v = t.rhs(r);
        if c < n {
            x[c] += v;
        } else if c < nstruct {
            x[c - n] -= v;
        }
    }
    // reduced cost of artificial r is -(dual of the sign-flipped row r)
    let mut dual = DVector::from_iterator(m, (0..m).map(|r| -t.obj(nstruct + r)));
    for (d, s) in dual.iter_mut().zip(&sign) {
        *d *= s;
    }
    Ok((x, dual, t.pivots))
}

fn basis_matrix(t: &Tableau) -> DMatrix<f64> {
    DMatrix::from_fn(t.rows, t.rows, |r, k| t.orig[(r, t.basis[k])])
}

/// Iterative refinement of `M z = rhs` with compensated residuals.
fn refine_primal(
    mat: &DMatrix<f64>,
    lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    rhs: &DVector<f64>,
    z: &mut DVector<f64>,
) {
    for _ in 0..REFINE_STEPS {
        let res = DVector::from_iterator(
            mat.nrows(),
            (0..mat.nrows()).map(|r| dot2(mat.row(r).iter().copied().chain([-1.0]), z.iter().copied().chain([rhs[r]]))),
        );
        let Some(dz) = lu.solve(&res) else { return };
        if dz.iter().any(|v| !v.is_finite()) {
            return;
        }
        *z -= dz;
    }
}
