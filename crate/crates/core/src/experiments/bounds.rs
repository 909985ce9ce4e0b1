//! Guarantee quantities for a support set, driven by a small JSON config.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SCHEMA_VERSION;
use crate::error::{Error, Result};
use crate::guarantees::{
    prior_support_quantities, sufficient_m, truncation_bound_for_matrix, GuaranteeReport, PriorSupportReport,
    TruncationReport,
};
use crate::index_sets::{cc_exponent, is_lower, lc_exponent, random_lower_set, IndexSet, IndexSetKind, MultiIndex};
use crate::measurement::{assemble_matrix, draw_samples};
use crate::poly_basis::{BasisSpec, Scenario};
use crate::weights::{intrinsic_weights, weights_from_strategy, WeightStrategy};

/// How the support `Delta` (or a prior estimate of it) is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SupportSpec {
    /// A random lower set of the given size.
    RandomLower {
        size: usize,
        seed: u64,
    },
    /// The first `count` indices of the full set in graded order.
    First {
        count: usize,
    },
    Indices {
        indices: Vec<MultiIndex>,
    },
}

impl SupportSpec {
    fn build(&self, full: &IndexSet) -> Result<IndexSet> {
        let d = full.dimension();
        match self {
            SupportSpec::RandomLower { size, seed } => random_lower_set(d, *size, *seed),
            SupportSpec::First { count } => {
                if *count > full.len() {
                    return Err(Error::Config(format!("support of {count} indices exceeds |I_K| = {}", full.len())));
                }
                IndexSet::from_indices(d, full.indices()[..*count].iter().cloned())
            }
            SupportSpec::Indices { indices } => IndexSet::from_indices(d, indices.iter().cloned()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationSpec {
    pub m: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    pub estimate: SupportSpec,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub schema_version: u32,
    pub scenario: Scenario,
    pub d: usize,
    pub index_set_kind: IndexSetKind,
    #[serde(rename = "K")]
    pub k: u32,
    pub support: SupportSpec,
    pub weight_strategy: WeightStrategy,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<TruncationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior_support: Option<PriorSpec>,
}

impl BoundsConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: BoundsConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if config.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!("unsupported schema_version {}", config.schema_version)));
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// The combinatorial bound on `|Delta|_u` for a lower set of size `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerSetBound {
    pub s: usize,
    pub card_u: f64,
    pub card_u_bound: f64,
    /// `2 card_u_bound`, the bound on `M` when `w = u`.
    pub m_bound_for_intrinsic_weights: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub support_size: usize,
    pub full_size: usize,
    pub support_is_lower: bool,
    pub guarantee: GuaranteeReport,
    pub lower_set_bound: Option<LowerSetBound>,
    pub truncation: Option<TruncationReport>,
    pub prior_support: Option<PriorSupportReport>,
}

/// Combinatorial bound on `|Delta|_u` for a lower set of size `s` in `d`
/// dimensions.
pub fn lower_set_card_u_bound(scenario: Scenario, d: usize, s: usize) -> f64 {
    let s = s as f64;
    match scenario {
        Scenario::CC => s.powf(cc_exponent()),
        Scenario::LU => s * s,
        Scenario::LC => FRAC_PI_2.powi(d as i32) * s.powf(lc_exponent()),
    }
}

pub fn bounds_report(config: &BoundsConfig) -> Result<BoundsReport> {
    let spec = BasisSpec::new(config.scenario, config.d)?;
    let full = config.index_set_kind.build(config.d, config.k)?;
    let delta = config.support.build(&full)?;
    if !delta.is_subset_of(&full) {
        return Err(Error::Config(format!(
            "support is not contained in the {:?} set with K = {}",
            config.index_set_kind, config.k
        )));
    }
    let u = intrinsic_weights(&full, &spec)?;
    let w = weights_from_strategy(&config.weight_strategy, &full, &spec)?;
    let guarantee = sufficient_m(&delta, &full, &u, &w, config.epsilon)?;
    let lower = is_lower(&delta);
    let lower_set_bound = lower.then(|| {
        let bound = lower_set_card_u_bound(config.scenario, config.d, delta.len());
        LowerSetBound {
            s: delta.len(),
            card_u: guarantee.delta_card_u,
            card_u_bound: bound,
            m_bound_for_intrinsic_weights: 2.0 * bound,
        }
    });
    let truncation = match config.truncation {
        Some(t) => {
            let samples = draw_samples(&spec, t.m, t.seed)?;
            let scaled = assemble_matrix(&spec, &samples, &full)? * (t.m as f64).sqrt();
            Some(truncation_bound_for_matrix(&scaled, &w, None)?)
        }
        None => None,
    };
    let prior_support = match &config.prior_support {
        Some(p) => Some(prior_support_quantities(&delta, &p.estimate.build(&full)?, p.gamma)?),
        None => None,
    };
    Ok(BoundsReport {
        support_size: delta.len(),
        full_size: full.len(),
        support_is_lower: lower,
        guarantee,
        lower_set_bound,
        truncation,
        prior_support,
    })
}

impl BoundsReport {
    /// Two-column plain-text table.
    pub fn to_table(&self) -> String {
        let mut rows: Vec<(String, String)> = vec![
            ("|Delta|".into(), self.support_size.to_string()),
            ("N = |I_K|".into(), self.full_size.to_string()),
            ("Delta is lower".into(), self.support_is_lower.to_string()),
        ];
        let g = &self.guarantee;
        rows.extend([
            ("|Delta|_u".into(), format!("{:.6}", g.delta_card_u)),
            ("|Delta|_w".into(), format!("{:.6}", g.delta_card_w)),
            ("max u^2/w^2 off Delta".into(), format!("{:.6}", g.tail_sup_ratio)),
            ("M(Delta; u, w)".into(), format!("{:.6}", g.m_value)),
            ("lambda".into(), format!("{:.6}", g.lambda)),
            ("log factor".into(), format!("{:.6}", g.log_factor)),
            ("m estimate (constant 1)".into(), format!("{:.3}", g.sufficient_m_estimate)),
            ("min w >= 1 off Delta".into(), g.hypothesis_min_weight_ok.to_string()),
        ]);
        if let Some(b) = &self.lower_set_bound {
            rows.push(("lower-set bound on |Delta|_u".into(), format!("{:.6}", b.card_u_bound)));
            rows.push(("bound on M for w = u".into(), format!("{:.6}", b.m_bound_for_intrinsic_weights)));
        }
        if let Some(t) = &self.truncation {
            rows.push(("rank r".into(), t.rank_r.to_string()));
            rows.push(("sigma_r".into(), format!("{:.6e}", t.sigma_r)));
            rows.push(("truncation factor".into(), format!("{:.6}", t.bound_factor)));
        }
        if let Some(p) = &self.prior_support {
            rows.push(("rho".into(), format!("{:.6}", p.rho)));
            rows.push(("sigma".into(), format!("{:.6}", p.sigma)));
            rows.push(("M weighted".into(), format!("{:.6}", p.m_weighted)));
            rows.push(("M unweighted".into(), format!("{:.6}", p.m_unweighted)));
            rows.push(("weighted is smaller".into(), p.weighted_is_smaller.to_string()));
        }
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<width$}  {v}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(scenario: Scenario) -> BoundsConfig {
        BoundsConfig {
            schema_version: 1,
            scenario,
            d: 3,
            index_set_kind: IndexSetKind::TD,
            k: 20,
            support: SupportSpec::RandomLower { size: 20, seed: 4 },
            weight_strategy: WeightStrategy::IntrinsicPower { theta: 1.0 },
            epsilon: 0.1,
            truncation: None,
            prior_support: None,
        }
    }

    #[test]
    fn intrinsic_weights_meet_lower_set_bounds() {
        let cc = bounds_report(&config(Scenario::CC)).unwrap();
        let b = cc.lower_set_bound.unwrap();
        assert!((b.m_bound_for_intrinsic_weights - 2.0 * 20f64.powf(3f64.log2())).abs() < 1e-9);
        assert!((b.m_bound_for_intrinsic_weights - 230.735).abs() < 1e-3);
        assert!((cc.guarantee.m_value - 2.0 * cc.guarantee.delta_card_u).abs() < 1e-9);
        assert!(cc.guarantee.m_value <= b.m_bound_for_intrinsic_weights);

        let lu = bounds_report(&config(Scenario::LU)).unwrap();
        assert_eq!(lu.lower_set_bound.unwrap().m_bound_for_intrinsic_weights, 800.0);
        assert!(lu.guarantee.m_value <= 800.0);

        let lc = bounds_report(&config(Scenario::LC)).unwrap();
        assert!(lc.guarantee.m_value <= lc.lower_set_bound.unwrap().m_bound_for_intrinsic_weights * (1.0 + 1e-12));
    }

    #[test]
    fn prior_support_and_truncation_sections() {
        let mut c = config(Scenario::CC);
        c.d = 1;
        c.index_set_kind = IndexSetKind::TP;
        c.k = 40;
        c.support = SupportSpec::First { count: 10 };
        c.weight_strategy = WeightStrategy::Unit;
        c.truncation = Some(TruncationSpec { m: 20, seed: 3 });
        c.prior_support = Some(PriorSpec { estimate: SupportSpec::First { count: 10 }, gamma: 0.5 });
        let r = bounds_report(&c).unwrap();
        let p = r.prior_support.unwrap();
        assert_eq!((p.rho, p.sigma), (1.0, 1.0));
        assert!(p.weighted_is_smaller);
        let t = r.truncation.unwrap();
        assert_eq!(t.rank_r, 20);
        assert!(t.sigma_r > 0.0);
        let table = bounds_report(&c).unwrap().to_table();
        assert!(table.contains("M weighted") && table.contains("truncation factor"));
    }

    #[test]
    fn config_errors() {
        let mut c = config(Scenario::CC);
        c.k = 2;
        assert!(bounds_report(&c).is_err());
        let text = serde_json::to_string(&config(Scenario::LU)).unwrap();
        assert_eq!(BoundsConfig::from_json(&text).unwrap(), config(Scenario::LU));
        assert!(BoundsConfig::from_json(&text.replace("\"schema_version\":1", "\"schema_version\":9")).is_err());
    }
}
