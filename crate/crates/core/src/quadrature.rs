//! Gauss rules for the orthogonality measures, normalized as probability
//! measures so that `sum_k w_k phi_i(x_k) phi_j(x_k) = delta_ij` whenever the
//! rule is exact for the product.

use std::f64::consts::PI;

use crate::poly_basis::Family;

#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// `n`-point rule for the orthogonality measure of `family`; exact for
    /// polynomials of degree up to `2n - 1`.
    pub fn for_family(family: Family, n: usize) -> Self {
        match family {
            Family::Chebyshev => gauss_chebyshev(n),
            Family::Legendre => gauss_legendre(n),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Gauss–Chebyshev nodes `cos((2k - 1) pi / 2n)` with equal weights `1/n`.
pub fn gauss_chebyshev(n: usize) -> GaussRule {
    let nodes = (1..=n).map(|k| ((2 * k - 1) as f64 * PI / (2 * n) as f64).cos()).collect();
    GaussRule { nodes, weights: vec![1.0 / n as f64; n] }
}

/// Gauss–Legendre rule by Newton iteration on `P_n`, weights halved so they
/// sum to one.
pub fn gauss_legendre(n: usize) -> GaussRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for k in 0..n.div_ceil(2) {
        let mut x = (PI * (k as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, p_prev) = legendre_pair(n, x);
            let dp = nf * (x * p - p_prev) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let (p, p_prev) = legendre_pair(n, x);
        let dp = nf * (x * p - p_prev) / (x * x - 1.0);
        let w = 1.0 / ((1.0 - x * x) * dp * dp);
        nodes[k] = x;
        nodes[n - 1 - k] = -x;
        weights[k] = w;
        weights[n - 1 - k] = w;
    }
    GaussRule { nodes, weights }
}

/// `(P_n(x), P_{n-1}(x))` in the classical normalization.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = next;
    }
    (p, p_prev)
}
