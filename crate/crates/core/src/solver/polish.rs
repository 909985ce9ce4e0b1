use nalgebra::{DMatrix, DVector};

use super::feasible_dual;

/// A primal point with a matching dual certificate.
#[derive(Debug, Clone)]
pub(super) struct Candidate {
    pub x: DVector<f64>,
    pub objective: f64,
    pub residual: f64,
    pub dual: DVector<f64>,
    pub gap: f64,
}

impl Candidate {
    pub fn certified(&self, obj_tol: f64) -> bool {
        self.gap <= obj_tol * (1.0 + self.objective)
    }
}

/// Solves the problem restricted to `support` with the sign pattern `signs`
/// (a zero entry takes its sign from the least-squares solution).
///
/// With `A_S = QR` and `h = R^{-T} (w_S * s)`, the restricted optimality
/// conditions are `A_S^T lambda = w_S * s` and `lambda = nu (y - A_S x_S)`.
/// For `eta > 0` the multiplier `nu` has the closed form
/// `||Q h|| / sqrt(eta^2 - ||e||^2)` where `e` is the least-squares residual.
/// For `eta = 0` the point is the least-squares solution and the dual is the
/// projection of `dual_hint` onto `{A_S^T lambda = w_S * s}`.
///
/// Returns `None` when the restricted problem is rank deficient, cannot
/// reach the constraint, or its solution contradicts the sign pattern.
pub(super) fn polish(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &[f64],
    eta: f64,
    support: &[usize],
    signs: &[f64],
    dual_hint: &DVector<f64>,
) -> Option<Candidate> {
    let m = a.nrows();
    let k = support.len();
    if k == 0 || k > m {
        return None;
    }
    let a_s = a.select_columns(support);
    let qr = a_s.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let rmax = r.diagonal().iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if r.diagonal().iter().any(|v| v.abs() <= 1e-10 * rmax) {
        return None;
    }
    let qty = q.tr_mul(y);
    let x_ls = r.solve_upper_triangular(&qty)?;
    let e_ls = y - &q * &qty;
    // a zero sign is taken from the least-squares solution
    let signs: Vec<f64> = signs.iter().zip(x_ls.iter()).map(|(&s, &x)| if s == 0.0 { x.signum() } else { s }).collect();
    let ws = DVector::from_iterator(k, support.iter().zip(&signs).map(|(&j, s)| w[j] * s));
    let h = r.transpose().solve_lower_triangular(&ws)?;

    let (x_s, mu) = if eta == 0.0 {
        let correction = &h - q.tr_mul(dual_hint);
        let mut mu = dual_hint + &q * correction;
        if k < m {
            repair_free_directions(a, w, &a_s, support, &mut mu);
        }
        (x_ls, mu)
    } else {
        let slack = eta * eta - e_ls.norm_squared();
        if slack <= 0.0 {
            return None;
        }
        let g = &q * &h;
        let nu = g.norm() / slack.sqrt();
        let step = r.solve_upper_triangular(&h)?;
        (x_ls - step / nu, e_ls * nu + g)
    };
    if x_s.iter().zip(&signs).any(|(v, s)| v * s < 0.0) {
        return None;
    }

    let mut x = DVector::zeros(a.ncols());
    for (&j, v) in support.iter().zip(x_s.iter()) {
        x[j] = *v;
    }
    let objective: f64 = x.iter().zip(w).map(|(v, wi)| v.abs() * wi).sum();
    let residual = (a * &x - y).norm();
    let (dual, value) = feasible_dual(a, y, w, eta, mu);
    Some(Candidate { x, objective, residual, dual, gap: objective - value })
}

/// With `eta = 0` and `|S| < m` the dual is only fixed up to the null space of
/// `A_S^T`, along which `y^T mu` is constant. Moves `mu` one direction at a
/// time to the nearest point satisfying `|A_j^T mu| <= w_j` off the support.
fn repair_free_directions(a: &DMatrix<f64>, w: &[f64], a_s: &DMatrix<f64>, support: &[usize], mu: &mut DVector<f64>) {
    let (m, k) = a_s.shape();
    let mut aug = DMatrix::zeros(m, k + m);
    aug.columns_mut(0, k).copy_from(a_s);
    aug.columns_mut(k, m).fill_with_identity();
    let full_q = aug.qr().q();
    let null = full_q.columns(k, m - k).into_owned();
    let off: Vec<usize> = {
        let mut on = vec![false; a.ncols()];
        support.iter().for_each(|&j| on[j] = true);
        (0..a.ncols()).filter(|&j| !on[j]).collect()
    };
    let an = a.tr_mul(&null);
    for _sweep in 0..3 {
        let corr = a.tr_mul(mu);
        let worst = off.iter().map(|&j| corr[j].abs() - w[j]).fold(f64::NEG_INFINITY, f64::max);
        if worst <= 0.0 {
            return;
        }
        for l in 0..null.ncols() {
            let corr = a.tr_mul(mu);
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for &j in &off {
                let (c, d) = (corr[j], an[(j, l)]);
                if d.abs() < 1e-14 {
                    continue;
                }
                let (t1, t2) = ((-w[j] - c) / d, (w[j] - c) / d);
                lo = lo.max(t1.min(t2));
                hi = hi.min(t1.max(t2));
            }
            if lo <= hi {
                let t = 0.0f64.clamp(lo, hi);
                *mu += null.column(l) * t;
            }
        }
    }
}
