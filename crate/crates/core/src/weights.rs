//! Optimization weights over an index set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index_sets::{IndexSet, MultiIndex};
use crate::poly_basis::{intrinsic_weight_unchecked, BasisSpec};

/// How a weight vector was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightStrategy {
    /// `w_i = 1`
    Unit,
    /// `w_i = u_i^theta`
    IntrinsicPower {
        theta: f64,
    },
    /// `w_i = (i + 1)^alpha`, univariate only.
    PolynomialGrowth {
        alpha: f64,
    },
    /// `w_i = prod_j (i_j + 1)^alpha`
    AnisotropicProduct {
        alpha: f64,
    },
    /// `w_i = (|i|_1 + 1)^alpha`
    TotalDegreeGrowth {
        alpha: f64,
    },
    /// `w_i = u_i prod_j (i_j + 1)^alpha`
    IntrinsicTimesProduct {
        alpha: f64,
    },
    /// `w_i = gamma` on the prior support estimate, `1` elsewhere.
    PriorSupport {
        gamma: f64,
        support: Vec<MultiIndex>,
    },
    Custom,
}

impl WeightStrategy {
    /// Same strategy with its scalar parameter replaced, for sweeps.
    pub fn with_parameter(&self, p: f64) -> WeightStrategy {
        match self {
            WeightStrategy::Unit => WeightStrategy::Unit,
            WeightStrategy::IntrinsicPower { .. } => WeightStrategy::IntrinsicPower { theta: p },
            WeightStrategy::PolynomialGrowth { .. } => WeightStrategy::PolynomialGrowth { alpha: p },
            WeightStrategy::AnisotropicProduct { .. } => WeightStrategy::AnisotropicProduct { alpha: p },
            WeightStrategy::TotalDegreeGrowth { .. } => WeightStrategy::TotalDegreeGrowth { alpha: p },
            WeightStrategy::IntrinsicTimesProduct { .. } => WeightStrategy::IntrinsicTimesProduct { alpha: p },
            WeightStrategy::PriorSupport { support, .. } => {
                WeightStrategy::PriorSupport { gamma: p, support: support.clone() }
            }
            WeightStrategy::Custom => WeightStrategy::Custom,
        }
    }

    pub fn parameter(&self) -> Option<f64> {
        match self {
            WeightStrategy::IntrinsicPower { theta } => Some(*theta),
            WeightStrategy::PolynomialGrowth { alpha }
            | WeightStrategy::AnisotropicProduct { alpha }
            | WeightStrategy::TotalDegreeGrowth { alpha }
            | WeightStrategy::IntrinsicTimesProduct { alpha } => Some(*alpha),
            WeightStrategy::PriorSupport { gamma, .. } => Some(*gamma),
            WeightStrategy::Unit | WeightStrategy::Custom => None,
        }
    }
}

/// Strictly positive, finite weights aligned with an index set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    values: Vec<f64>,
    strategy: WeightStrategy,
}

impl WeightVector {
    pub fn unit(n: usize) -> Self {
        WeightVector { values: vec![1.0; n], strategy: WeightStrategy::Unit }
    }

    pub fn custom(values: Vec<f64>) -> Result<Self> {
        Self::tagged(values, WeightStrategy::Custom)
    }

    fn tagged(values: Vec<f64>, strategy: WeightStrategy) -> Result<Self> {
        if let Some(bad) = values.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidParameter(format!("weights must be positive and finite, got {bad}")));
        }
        Ok(WeightVector { values, strategy })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn strategy(&self) -> &WeightStrategy {
        &self.strategy
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Multiplies every weight by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::tagged(self.values.iter().map(|w| w * c).collect(), WeightStrategy::Custom)
    }

    /// `||x||_{1,w} = sum_i w_i |x_i|`
    pub fn weighted_l1(&self, x: &[f64]) -> f64 {
        self.values.iter().zip(x).map(|(w, v)| w * v.abs()).sum()
    }

    /// Weights of the members of `subset`, looked up by position in `full`.
    pub fn restrict(&self, full: &IndexSet, subset: &IndexSet) -> Result<WeightVector> {
        if self.len() != full.len() {
            return Err(Error::MissingWeight { expected: full.len(), found: self.len() });
        }
        let values = subset
            .iter()
            .map(|i| {
                full.position(i)
                    .map(|p| self.values[p])
                    .ok_or_else(|| Error::InvalidParameter(format!("index ({i}) is not in the full set")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(WeightVector { values, strategy: WeightStrategy::Custom })
    }
}

fn check_exponent(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite and nonnegative, got {v}")))
    }
}

/// Intrinsic weights `u_i` for every member of `index_set`.
pub fn intrinsic_weights(index_set: &IndexSet, spec: &BasisSpec) -> Result<WeightVector> {
    check_set(index_set, spec)?;
    let values = index_set.iter().map(|i| intrinsic_weight_unchecked(spec.scenario(), i.entries())).collect();
    WeightVector::tagged(values, WeightStrategy::IntrinsicPower { theta: 1.0 })
}

fn check_set(index_set: &IndexSet, spec: &BasisSpec) -> Result<()> {
    if index_set.dimension() != spec.dimension() {
        return Err(Error::DimensionMismatch { expected: spec.dimension(), found: index_set.dimension() });
    }
    Ok(())
}

fn product_growth(i: &MultiIndex, alpha: f64) -> f64 {
    i.entries().iter().map(|&k| (k as f64 + 1.0).powf(alpha)).product()
}

/// Evaluates a weight strategy on `index_set` in canonical order.
pub fn weights_from_strategy(
    strategy: &WeightStrategy,
    index_set: &IndexSet,
    spec: &BasisSpec,
) -> Result<WeightVector> {
    check_set(index_set, spec)?;
    let u = |i: &MultiIndex| intrinsic_weight_unchecked(spec.scenario(), i.entries());
    let values: Vec<f64> = match strategy {
        WeightStrategy::Unit => vec![1.0; index_set.len()],
        WeightStrategy::IntrinsicPower { theta } => {
            check_exponent("theta", *theta)?;
            index_set.iter().map(|i| u(i).powf(*theta)).collect()
        }
        WeightStrategy::PolynomialGrowth { alpha } => {
            check_exponent("alpha", *alpha)?;
            if spec.dimension() != 1 {
                return Err(Error::InvalidParameter(
                    "polynomial_growth weights are univariate; use anisotropic_product or total_degree_growth".into(),
                ));
            }
            index_set.iter().map(|i| product_growth(i, *alpha)).collect()
        }
        WeightStrategy::AnisotropicProduct { alpha } => {
            check_exponent("alpha", *alpha)?;
            index_set.iter().map(|i| product_growth(i, *alpha)).collect()
        }
        WeightStrategy::TotalDegreeGrowth { alpha } => {
            check_exponent("alpha", *alpha)?;
            index_set.iter().map(|i| (i.norm_1() as f64 + 1.0).powf(*alpha)).collect()
        }
        WeightStrategy::IntrinsicTimesProduct { alpha } => {
            check_exponent("alpha", *alpha)?;
            index_set.iter().map(|i| u(i) * product_growth(i, *alpha)).collect()
        }
        WeightStrategy::PriorSupport { gamma, support } => {
            if !(*gamma > 0.0 && *gamma < 1.0) {
                return Err(Error::InvalidParameter(format!("gamma must lie in (0, 1), got {gamma}")));
            }
            let gamma_set = IndexSet::from_indices(spec.dimension(), support.iter().cloned())?;
            index_set.iter().map(|i| if gamma_set.contains(i) { *gamma } else { 1.0 }).collect()
        }
        WeightStrategy::Custom => {
            return Err(Error::InvalidParameter(
                "custom weights carry explicit values; use WeightVector::custom".into(),
            ))
        }
    };
    WeightVector::tagged(values, strategy.clone())
}
