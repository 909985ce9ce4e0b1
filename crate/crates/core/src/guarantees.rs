//! Closed-form quantities from the weighted recovery guarantees.
//!
//! Every estimate of the form `m >~ ...` hides a universal constant that is
//! not known; reports use the constant 1 and say so.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index_sets::{IndexSet, MultiIndex};
use crate::measurement::MeasurementSystem;
use crate::weights::WeightVector;

/// Default relative tolerance for the numerical rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Inputs and result of the sufficient sample-count estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeReport {
    #[serde(rename = "M_value")]
    pub m_value: f64,
    pub delta_card_u: f64,
    pub delta_card_w: f64,
    /// `max u_i^2 / w_i^2` over the complement of the support.
    pub tail_sup_ratio: f64,
    pub lambda: f64,
    pub sufficient_m_estimate: f64,
    pub log_factor: f64,
    /// `min w_i >= 1` over the complement of the support.
    pub hypothesis_min_weight_ok: bool,
    /// The complement was empty and the tail term was taken as zero.
    pub empty_complement: bool,
    pub universal_constant: f64,
    pub universal_constant_unknown: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub rank_r: usize,
    pub sigma_r: f64,
    /// `||P_K w||_2`
    pub pk_weight_norm: f64,
    /// `1 + ||P_K w|| / sigma_r`
    pub bound_factor: f64,
    pub rank_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSupportReport {
    pub rho: f64,
    pub sigma: f64,
    #[serde(rename = "M_weighted")]
    pub m_weighted: f64,
    #[serde(rename = "M_unweighted")]
    pub m_unweighted: f64,
    /// `M_weighted < M_unweighted`, equivalently `rho > (1 + gamma) / 2`.
    pub weighted_is_smaller: bool,
    /// Set when the estimate `Gamma` is empty and `rho` is undefined.
    pub degenerate: bool,
}

struct Split {
    card_u: f64,
    card_w: f64,
    tail_ratio: Option<f64>,
    tail_min_w: Option<f64>,
}

fn split(delta: &IndexSet, full: &IndexSet, u: &WeightVector, w: &WeightVector) -> Result<Split> {
    for v in [u, w] {
        if v.len() != full.len() {
            return Err(Error::MissingWeight { expected: full.len(), found: v.len() });
        }
    }
    if !delta.is_subset_of(full) {
        return Err(Error::InvalidParameter("support is not contained in the full index set".into()));
    }
    let (uv, wv) = (u.values(), w.values());
    let mut s = Split { card_u: 0.0, card_w: 0.0, tail_ratio: None, tail_min_w: None };
    for (p, idx) in full.iter().enumerate() {
        if delta.contains(idx) {
            s.card_u += uv[p] * uv[p];
            s.card_w += wv[p] * wv[p];
        } else {
            let r = (uv[p] / wv[p]).powi(2);
            s.tail_ratio = Some(s.tail_ratio.map_or(r, |t| t.max(r)));
            s.tail_min_w = Some(s.tail_min_w.map_or(wv[p], |t| t.min(wv[p])));
        }
    }
    Ok(s)
}

/// `M(Delta; u, w) = |Delta|_u + max_{full \ Delta} (u_i^2 / w_i^2) max(|Delta|_w, 1)`
///
/// `u` and `w` are indexed by `full`. An empty complement contributes zero.
pub fn measurement_quantity(delta: &IndexSet, full: &IndexSet, u: &WeightVector, w: &WeightVector) -> Result<f64> {
    let s = split(delta, full, u, w)?;
    Ok(s.card_u + s.tail_ratio.unwrap_or(0.0) * s.card_w.max(1.0))
}

/// `lambda = 1 + sqrt(log(1/eps)) / log(2 N sqrt(max(card_w, 1)))` for
/// `0 < eps <= 1/e`.
pub fn lambda_factor(epsilon: f64, n: usize, delta_card_w: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    if n == 0 {
        return Err(Error::InvalidParameter("N must be at least 1".into()));
    }
    if !(delta_card_w.is_finite() && delta_card_w >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "weighted cardinality must be finite and nonnegative, got {delta_card_w}"
        )));
    }
    let denom = (2.0 * n as f64 * delta_card_w.max(1.0).sqrt()).ln();
    Ok(1.0 + (1.0 / epsilon).ln().sqrt() / denom)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon <= (-1.0f64).exp() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1/e], got {epsilon}")))
    }
}

/// Sample count `M(Delta; u, w) log(1/eps) log(2 N max(sqrt|Delta|_w, 1))`
/// with unit constant, where `N = |full|`.
pub fn sufficient_m(
    delta: &IndexSet,
    full: &IndexSet,
    u: &WeightVector,
    w: &WeightVector,
    epsilon: f64,
) -> Result<GuaranteeReport> {
    check_epsilon(epsilon)?;
    let s = split(delta, full, u, w)?;
    let n = full.len().max(1);
    let tail = s.tail_ratio.unwrap_or(0.0);
    let m_value = s.card_u + tail * s.card_w.max(1.0);
    let log_factor = (1.0 / epsilon).ln() * (2.0 * n as f64 * s.card_w.sqrt().max(1.0)).ln();
    Ok(GuaranteeReport {
        m_value,
        delta_card_u: s.card_u,
        delta_card_w: s.card_w,
        tail_sup_ratio: tail,
        lambda: lambda_factor(epsilon, n, s.card_w)?,
        sufficient_m_estimate: m_value * log_factor,
        log_factor,
        hypothesis_min_weight_ok: s.tail_min_w.is_none_or(|v| v >= 1.0),
        empty_complement: s.tail_ratio.is_none(),
        universal_constant: 1.0,
        universal_constant_unknown: true,
    })
}

/// Truncation factor for the system matrix `A`; the singular values are
/// those of `sqrt(m) A`. `rank_tol` is relative to the largest one.
pub fn truncation_bound(
    system: &MeasurementSystem,
    weights: &WeightVector,
    rank_tol: Option<f64>,
) -> Result<TruncationReport> {
    let scaled = system.matrix() * (system.m() as f64).sqrt();
    truncation_bound_for_matrix(&scaled, weights, rank_tol)
}

/// Truncation factor for an explicit matrix `U P_K`.
pub fn truncation_bound_for_matrix(
    u: &DMatrix<f64>,
    weights: &WeightVector,
    rank_tol: Option<f64>,
) -> Result<TruncationReport> {
    if weights.len() != u.ncols() {
        return Err(Error::MissingWeight { expected: u.ncols(), found: weights.len() });
    }
    let rank_tol = rank_tol.unwrap_or(DEFAULT_RANK_TOL);
    if !(rank_tol.is_finite() && rank_tol >= 0.0) {
        return Err(Error::InvalidParameter(format!("rank tolerance must be finite and nonnegative, got {rank_tol}")));
    }
    let mut sv: Vec<f64> = u.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let smax = sv.first().copied().unwrap_or(0.0);
    if !(smax > 0.0) {
        return Err(Error::RankZero);
    }
    let rank_r = sv.iter().filter(|&&s| s > rank_tol * smax).count();
    let sigma_r = sv[rank_r - 1];
    let pk_weight_norm = weights.values().iter().map(|w| w * w).sum::<f64>().sqrt();
    Ok(TruncationReport { rank_r, sigma_r, pk_weight_norm, bound_factor: 1.0 + pk_weight_norm / sigma_r, rank_tol })
}

/// Prior-support comparison with `u = 1` and weights `gamma` on `Gamma`.
///
/// The closed form `(2 + sigma (1 + gamma - 2 rho)) s` counts each member of
/// `Gamma` with weighted cardinality `gamma`, so `gamma` plays the role of the
/// squared weight: the same value comes from [`measurement_quantity`] with
/// `w_i = sqrt(gamma)` on `Gamma`, provided `|Delta u Gamma|_w >= 1` and some
/// index lies outside `Delta u Gamma`.
pub fn prior_support_quantities(delta: &IndexSet, gamma_set: &IndexSet, gamma: f64) -> Result<PriorSupportReport> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    if delta.is_empty() {
        return Err(Error::InvalidParameter("support must be nonempty".into()));
    }
    if delta.dimension() != gamma_set.dimension() {
        return Err(Error::DimensionMismatch { expected: delta.dimension(), found: gamma_set.dimension() });
    }
    let s = delta.len() as f64;
    let m_unweighted = 2.0 * s;
    if gamma_set.is_empty() {
        return Ok(PriorSupportReport {
            rho: 0.0,
            sigma: 0.0,
            m_weighted: m_unweighted,
            m_unweighted,
            weighted_is_smaller: false,
            degenerate: true,
        });
    }
    let g = gamma_set.len() as f64;
    let rho = delta.intersection(gamma_set)?.len() as f64 / g;
    let sigma = g / s;
    let m_weighted = (2.0 + sigma * (1.0 + gamma - 2.0 * rho)) * s;
    Ok(PriorSupportReport {
        rho,
        sigma,
        m_weighted,
        m_unweighted,
        weighted_is_smaller: m_weighted < m_unweighted,
        degenerate: false,
    })
}

/// `M(Delta u Gamma; 1, w)` evaluated directly, with `w = sqrt(gamma)` on
/// `Gamma` and 1 elsewhere, over `Delta u Gamma` plus one outside index.
pub fn prior_support_direct(delta: &IndexSet, gamma_set: &IndexSet, gamma: f64) -> Result<f64> {
    let union = delta.union(gamma_set)?;
    let d = union.dimension();
    // an index of larger degree than anything in the union
    let outside = MultiIndex::new((0..d).map(|j| if j == 0 { union.max_degree() + 1 } else { 0 }).collect());
    let full = union.union(&IndexSet::from_indices(d, [outside])?)?;
    let w: Vec<f64> = full.iter().map(|i| if gamma_set.contains(i) { gamma.sqrt() } else { 1.0 }).collect();
    measurement_quantity(&union, &full, &WeightVector::unit(full.len()), &WeightVector::custom(w)?)
}
