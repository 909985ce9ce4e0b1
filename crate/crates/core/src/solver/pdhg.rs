//! Chambolle–Pock iteration for `min sum c_j |v_j|  s.t.  ||B v - y|| <= eta`.
//!
//! ```text
//! v+      = soft(v - tau B^T lam, tau c)
//! lam+    = shrink(lam + sigma B (2 v+ - v) - sigma y, sigma eta)
//! ```
//!
//! where `shrink(q, r) = q max(0, 1 - r/||q||)` is the proximal map of the
//! conjugate of the ball indicator. `B` is `A` with unit-norm columns
//! (`v_j = ||a_j|| x_j`) and `c_j = w_j / ||a_j||`; putting the weights in the
//! threshold rather than in `B` keeps the operator well conditioned when the
//! weights span many orders of magnitude. The optimal dual is `-lam`. Steps are
//! `tau = s / omega`, `sigma = s omega` with `s ||B|| < 1`. The iteration is
//! restarted from the current point or the running average whenever the KKT
//! error has dropped enough, and the primal weight `omega` is re-estimated at
//! each restart.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::feasible_dual;
use super::lp::simplex;
use super::polish::{polish, Candidate};
use super::{SolveResult, SolverOptions};
use crate::error::Result;

const POWER_SEED: u64 = 0x5E_ED0F_B0DD;
const STEP_SAFETY: f64 = 0.9;
const CHECK_EVERY: usize = 32;
const RESTART_SUFFICIENT: f64 = 0.2;
const RESTART_NECESSARY: f64 = 0.8;
const RESTART_ARTIFICIAL: f64 = 0.36;
const POLISH_INTERVAL_MIN: usize = 32;
const POLISH_INTERVAL_MAX: usize = 256;
const AUGMENT_TRIES: usize = 4;
const CROSSOVER_INTERVAL_MIN: usize = 512;

/// Largest singular value of `b` by power iteration on `b^T b`.
pub(crate) fn operator_norm(b: &DMatrix<f64>, iters: usize) -> f64 {
    let mut rng = ChaCha20Rng::seed_from_u64(POWER_SEED);
    let mut x = DVector::from_fn(b.ncols(), |_, _| rng.random::<f64>() - 0.5);
    let mut est = 0.0;
    for _ in 0..iters {
        let nx = x.norm();
        if nx == 0.0 {
            return 0.0;
        }
        x /= nx;
        let bx = b * &x;
        est = bx.norm();
        x = b.tr_mul(&bx);
    }
    est
}

fn soft_threshold(v: &mut DVector<f64>, t: f64, c: &[f64]) {
    for (x, cj) in v.iter_mut().zip(c) {
        *x = x.signum() * (x.abs() - t * cj).max(0.0);
    }
}

/// A primal-dual pair with cached products `B v` and `B^T lam`.
#[derive(Clone)]
struct Point {
    v: DVector<f64>,
    lam: DVector<f64>,
    bv: DVector<f64>,
    btl: DVector<f64>,
}

struct Measures {
    kkt: f64,
    objective: f64,
    residual: f64,
    /// dual objective after scaling `-lam` into the feasible box
    dual_value: f64,
    ratio: f64,
}

fn measure(z: &Point, y: &DVector<f64>, eta: f64, c: &[f64]) -> Measures {
    let objective: f64 = z.v.iter().zip(c).map(|(x, cj)| x.abs() * cj).sum();
    let residual = (&z.bv - y).norm();
    let raw_dual = -z.lam.dot(y) - eta * z.lam.norm();
    let box_violation: f64 = z.btl.iter().zip(c).map(|(g, cj)| (g.abs() - cj).max(0.0).powi(2)).sum::<f64>().sqrt();
    let p = (residual - eta).max(0.0);
    let gap = objective - raw_dual;
    let ratio = z.btl.iter().zip(c).map(|(g, cj)| g.abs() / cj).fold(1.0, f64::max);
    Measures {
        kkt: (p * p + box_violation * box_violation + gap * gap).sqrt(),
        objective,
        residual,
        dual_value: raw_dual / ratio,
        ratio,
    }
}

pub(super) fn solve(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &[f64],
    eta: f64,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    let (m, n) = a.shape();
    let mut b = a.clone();
    let mut scale = vec![1.0; n];
    for (j, sj) in scale.iter_mut().enumerate() {
        let nj = b.column(j).norm();
        if nj > 0.0 {
            *sj = nj;
            b.column_mut(j).scale_mut(1.0 / nj);
        }
    }
    let c: Vec<f64> = w.iter().zip(&scale).map(|(wj, sj)| wj / sj).collect();
    let to_x = |v: &DVector<f64>| DVector::from_iterator(n, v.iter().zip(&scale).map(|(vi, si)| vi / si));
    let relative = |g: &DVector<f64>| DVector::from_iterator(n, g.iter().zip(&c).map(|(gi, ci)| gi / ci));
    let norm = operator_norm(&b, opts.power_iters).max(f64::MIN_POSITIVE);
    let step = STEP_SAFETY / norm;
    let ynorm = y.norm();
    let mut omega = if ynorm > 0.0 { c.iter().map(|x| x * x).sum::<f64>().sqrt() / ynorm } else { 1.0 };

    let zero = Point { v: DVector::zeros(n), lam: DVector::zeros(m), bv: DVector::zeros(m), btl: DVector::zeros(n) };
    let mut z = zero.clone();
    let mut sum = zero.clone();
    let mut count = 0usize;
    let mut anchor = z.clone();
    let mut anchor_kkt = measure(&z, y, eta, &c).kkt;
    let mut last_candidate_kkt = f64::INFINITY;
    let mut since_restart = 0usize;

    let mut last_pattern: Vec<i8> = Vec::new();
    let mut polish_interval = POLISH_INTERVAL_MIN;
    let mut next_polish = POLISH_INTERVAL_MIN;
    let mut best: Option<Candidate> = None;
    let mut crossover_interval = CROSSOVER_INTERVAL_MIN;
    let mut crossover_attempts = 0usize;
    let mut next_crossover = CROSSOVER_INTERVAL_MIN;

    for iter in 1..=opts.max_iters {
        let tau = step / omega;
        let sigma = step * omega;
        let mut v_new = &z.v - &z.btl * tau;
        soft_threshold(&mut v_new, tau, &c);
        let bv_new = &b * &v_new;
        let mut q = &z.lam + (&bv_new * 2.0 - &z.bv) * sigma - y * sigma;
        let qn = q.norm();
        q *= if qn > 0.0 { (1.0 - sigma * eta / qn).max(0.0) } else { 0.0 };
        let btl_new = b.tr_mul(&q);
        z = Point { v: v_new, lam: q, bv: bv_new, btl: btl_new };

        sum.v += &z.v;
        sum.lam += &z.lam;
        sum.bv += &z.bv;
        sum.btl += &z.btl;
        count += 1;
        since_restart += 1;

        if iter % CHECK_EVERY != 0 && iter != opts.max_iters {
            continue;
        }

        let inv = 1.0 / count as f64;
        let avg = Point { v: &sum.v * inv, lam: &sum.lam * inv, bv: &sum.bv * inv, btl: &sum.btl * inv };
        let mz = measure(&z, y, eta, &c);
        let ma = measure(&avg, y, eta, &c);
        for (p, mp) in [(&z, &mz), (&avg, &ma)] {
            let gap = mp.objective - mp.dual_value;
            if mp.residual <= eta + opts.feas_tol && gap <= opts.obj_tol * (1.0 + mp.objective) {
                return Ok(finish(a, y, w, to_x(&p.v), -&p.lam / mp.ratio, gap, iter, true));
            }
        }

        let pattern: Vec<i8> = z.v.iter().map(|x| x.signum() as i8 * (*x != 0.0) as i8).collect();
        if pattern != last_pattern && iter >= next_polish {
            let hint = -&z.lam / mz.ratio;
            for support in candidate_supports(&z.v, &relative(&z.btl), m) {
                let signs: Vec<f64> = support.iter().map(|&j| z.v[j].signum() * (z.v[j] != 0.0) as u8 as f64).collect();
                if let Some(c) = polish(a, y, w, eta, &support, &signs, &hint) {
                    let feasible = c.residual <= eta + opts.feas_tol;
                    if feasible && c.certified(opts.obj_tol) {
                        let gap = c.gap;
                        return Ok(finish(a, y, w, c.x, c.dual, gap, iter, true));
                    }
                    if feasible && best.as_ref().is_none_or(|b| c.gap < b.gap) {
                        best = Some(c);
                    }
                }
            }
            last_pattern = pattern;
            polish_interval = (polish_interval * 5 / 4).min(POLISH_INTERVAL_MAX);
            next_polish = iter + polish_interval;
        }

        if eta == 0.0 && iter >= next_crossover {
            crossover_attempts += 1;
            if let Some(c) = crossover(a, y, w, &z.v, &relative(&z.btl), crossover_attempts + 1) {
                if c.residual <= opts.feas_tol && c.certified(opts.obj_tol) {
                    let gap = c.gap;
                    return Ok(finish(a, y, w, c.x, c.dual, gap, iter, true));
                }
                if c.residual <= opts.feas_tol && best.as_ref().is_none_or(|b| c.gap < b.gap) {
                    best = Some(c);
                }
            }
            crossover_interval *= 2;
            // once the crossover spans every column it no longer depends on the iterate
            next_crossover = if (crossover_attempts + 1) * m >= n { usize::MAX } else { iter + crossover_interval };
        }

        // adaptive restart
        let (cand, cand_kkt) = if ma.kkt < mz.kkt { (avg, ma.kkt) } else { (z.clone(), mz.kkt) };
        let restart = cand_kkt <= RESTART_SUFFICIENT * anchor_kkt
            || (cand_kkt <= RESTART_NECESSARY * anchor_kkt && cand_kkt > last_candidate_kkt)
            || since_restart as f64 >= RESTART_ARTIFICIAL * iter as f64;
        last_candidate_kkt = cand_kkt;
        if restart {
            let dv = (&cand.v - &anchor.v).norm();
            let dl = (&cand.lam - &anchor.lam).norm();
            if dv > 1e-10 && dl > 1e-10 {
                omega = (0.5 * (dl / dv).ln() + 0.5 * omega.ln()).exp().clamp(omega / 2.0, omega * 2.0);
            }
            z = cand;
            anchor = z.clone();
            anchor_kkt = cand_kkt;
            last_candidate_kkt = f64::INFINITY;
            sum = zero.clone();
            count = 0;
            since_restart = 0;
        }
    }

    let iters = opts.max_iters;
    if let Some(c) = best {
        return Ok(finish(a, y, w, c.x, c.dual, c.gap, iters, false));
    }
    let mz = measure(&z, y, eta, &c);
    Ok(finish(a, y, w, to_x(&z.v), -&z.lam / mz.ratio, mz.objective - mz.dual_value, iters, false))
}

/// Nonzero entries of `v`, keeping only the `cap` largest in magnitude.
fn select_support(v: &DVector<f64>, cap: usize) -> Vec<usize> {
    let mut support: Vec<usize> = (0..v.len()).filter(|&j| v[j] != 0.0).collect();
    if support.len() > cap {
        support.sort_by(|&i, &j| v[j].abs().total_cmp(&v[i].abs()).then(i.cmp(&j)));
        support.truncate(cap);
        support.sort_unstable();
    }
    support
}

/// Equality-constrained crossover: solves the problem exactly over the
/// primal support plus the columns of strongest dual correlation, at least
/// `factor * m` columns in all, then certifies the restricted dual on all
/// columns.
fn crossover(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &[f64],
    v: &DVector<f64>,
    btl: &DVector<f64>,
    factor: usize,
) -> Option<Candidate> {
    let (m, n) = a.shape();
    let mut cols: Vec<usize> = (0..n).filter(|&j| v[j] != 0.0).collect();
    let mut off: Vec<usize> = (0..n).filter(|&j| v[j] == 0.0).collect();
    off.sort_by(|&i, &j| btl[j].abs().total_cmp(&btl[i].abs()).then(i.cmp(&j)));
    let size = (cols.len() + m).max(factor * m).min(n);
    cols.extend(off.into_iter().take(size.saturating_sub(cols.len())));
    cols.sort_unstable();
    let wt: Vec<f64> = cols.iter().map(|&j| w[j]).collect();
    let (xt, mu, _) = simplex(&a.select_columns(&cols), y, &wt).ok()?;
    let mut x = DVector::zeros(n);
    for (&j, v) in cols.iter().zip(xt.iter()) {
        x[j] = *v;
    }
    let objective: f64 = x.iter().zip(w).map(|(v, wi)| v.abs() * wi).sum();
    let residual = (a * &x - y).norm();
    let (dual, value) = feasible_dual(a, y, w, 0.0, mu);
    Some(Candidate { x, objective, residual, dual, gap: objective - value })
}

/// Supports to try: the primal nonzeros, then while short of `m` columns
/// the same set extended by each of the strongest off-support relative dual
/// correlations `|B^T lam| / c`.
fn candidate_supports(v: &DVector<f64>, btl: &DVector<f64>, m: usize) -> Vec<Vec<usize>> {
    let primal = select_support(v, m);
    let mut out = vec![primal.clone()];
    if primal.len() < m {
        let mut off: Vec<usize> = (0..v.len()).filter(|&j| v[j] == 0.0).collect();
        off.sort_by(|&i, &j| btl[j].abs().total_cmp(&btl[i].abs()).then(i.cmp(&j)));
        for &j in off.iter().take(AUGMENT_TRIES) {
            let mut s = primal.clone();
            s.push(j);
            s.sort_unstable();
            out.push(s);
        }
    }
    out
}

fn finish(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &[f64],
    x: DVector<f64>,
    dual: DVector<f64>,
    gap: f64,
    iterations: usize,
    converged: bool,
) -> SolveResult {
    let residual_norm = (a * &x - y).norm();
    SolveResult {
        objective: x.iter().zip(w).map(|(v, wi)| v.abs() * wi).sum(),
        coefficients: x.iter().copied().collect(),
        residual_norm,
        iterations,
        converged,
        kkt_gap: gap,
        dual: dual.iter().copied().collect(),
    }
}
