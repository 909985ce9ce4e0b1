//! Orthonormal tensor Chebyshev and Legendre polynomials on `(-1, 1)^d`.
//!
//! Polynomials are normalized in `L^2_nu`, where `nu` is the orthogonality
//! probability measure of the family: the arcsine (Chebyshev) density
//! `1 / (pi sqrt(1 - t^2))` or the uniform density `1/2` per coordinate.
//! Samples are drawn from a possibly different measure `mu`; the three
//! supported `(family, mu)` pairs are enumerated by [`Scenario`].

use std::f64::consts::{FRAC_2_SQRT_PI, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index_sets::MultiIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Chebyshev,
    Legendre,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SamplingMeasure {
    /// Arcsine density `prod_j 1 / (pi sqrt(1 - t_j^2))`.
    ChebyshevMeasure,
    /// Uniform density `2^{-d}`.
    UniformMeasure,
}

/// The admissible `(family, sampling measure)` pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    /// Chebyshev polynomials, Chebyshev sampling.
    CC,
    /// Legendre polynomials, uniform sampling.
    LU,
    /// Legendre polynomials, Chebyshev sampling.
    LC,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::CC, Scenario::LU, Scenario::LC];

    pub fn family(self) -> Family {
        match self {
            Scenario::CC => Family::Chebyshev,
            Scenario::LU | Scenario::LC => Family::Legendre,
        }
    }

    pub fn sampling(self) -> SamplingMeasure {
        match self {
            Scenario::CC | Scenario::LC => SamplingMeasure::ChebyshevMeasure,
            Scenario::LU => SamplingMeasure::UniformMeasure,
        }
    }

    pub fn from_parts(family: Family, sampling: SamplingMeasure) -> Result<Self> {
        match (family, sampling) {
            (Family::Chebyshev, SamplingMeasure::ChebyshevMeasure) => Ok(Scenario::CC),
            (Family::Legendre, SamplingMeasure::UniformMeasure) => Ok(Scenario::LU),
            (Family::Legendre, SamplingMeasure::ChebyshevMeasure) => Ok(Scenario::LC),
            (Family::Chebyshev, SamplingMeasure::UniformMeasure) => Err(Error::InvalidParameter(
                "Chebyshev polynomials with uniform sampling is not a supported scenario".into(),
            )),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Scenario::CC => "CC",
            Scenario::LU => "LU",
            Scenario::LC => "LC",
        };
        f.write_str(s)
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CC" => Ok(Scenario::CC),
            "LU" => Ok(Scenario::LU),
            "LC" => Ok(Scenario::LC),
            other => Err(Error::InvalidParameter(format!("unknown scenario `{other}` (expected CC, LU or LC)"))),
        }
    }
}

/// Polynomial family, sampling measure and dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "BasisSpecRepr", into = "BasisSpecRepr")]
pub struct BasisSpec {
    scenario: Scenario,
    dimension: usize,
}

#[derive(Serialize, Deserialize)]
struct BasisSpecRepr {
    scenario: Scenario,
    dimension: usize,
}

impl TryFrom<BasisSpecRepr> for BasisSpec {
    type Error = Error;

    fn try_from(r: BasisSpecRepr) -> Result<Self> {
        BasisSpec::new(r.scenario, r.dimension)
    }
}

impl From<BasisSpec> for BasisSpecRepr {
    fn from(b: BasisSpec) -> Self {
        BasisSpecRepr { scenario: b.scenario, dimension: b.dimension }
    }
}

impl BasisSpec {
    pub fn new(scenario: Scenario, dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        Ok(BasisSpec { scenario, dimension })
    }

    pub fn from_parts(family: Family, sampling: SamplingMeasure, dimension: usize) -> Result<Self> {
        BasisSpec::new(Scenario::from_parts(family, sampling)?, dimension)
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn family(&self) -> Family {
        self.scenario.family()
    }

    pub fn sampling(&self) -> SamplingMeasure {
        self.scenario.sampling()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dimension {
            return Err(Error::DimensionMismatch { expected: self.dimension, found });
        }
        Ok(())
    }
}

/// A point of the open hypercube `(-1, 1)^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidParameter("a point needs at least one coordinate".into()));
        }
        for &t in &coords {
            check_open_interval(t)?;
        }
        Ok(Point(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

impl AsRef<[f64]> for Point {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

fn check_open_interval(t: f64) -> Result<()> {
    // NaN fails the comparison as well
    if t.abs() < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain { value: t })
    }
}

/// Orthonormal univariate polynomial `phi_degree(t)`.
pub fn eval_univariate(family: Family, degree: usize, t: f64) -> Result<f64> {
    check_open_interval(t)?;
    Ok(univariate_unchecked(family, degree, t))
}

pub(crate) fn univariate_unchecked(family: Family, degree: usize, t: f64) -> f64 {
    match family {
        Family::Chebyshev => {
            if degree == 0 {
                1.0
            } else {
                std::f64::consts::SQRT_2 * (degree as f64 * t.acos()).cos()
            }
        }
        Family::Legendre => {
            let mut p_prev = 1.0;
            if degree == 0 {
                return 1.0;
            }
            let mut p = t;
            for k in 1..degree {
                let kf = k as f64;
                let next = ((2.0 * kf + 1.0) * t * p - kf * p_prev) / (kf + 1.0);
                p_prev = p;
                p = next;
            }
            (2.0 * degree as f64 + 1.0).sqrt() * p
        }
    }
}

/// Fills `out[k] = phi_k(t)` for `k = 0..out.len()`.
pub(crate) fn univariate_table(family: Family, t: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    match family {
        Family::Chebyshev => {
            let theta = t.acos();
            out[0] = 1.0;
            for (k, v) in out.iter_mut().enumerate().skip(1) {
                *v = std::f64::consts::SQRT_2 * (k as f64 * theta).cos();
            }
        }
        Family::Legendre => {
            let mut p_prev = 1.0;
            let mut p = t;
            out[0] = 1.0;
            for k in 1..out.len() {
                if k > 1 {
                    let kf = (k - 1) as f64;
                    let next = ((2.0 * kf + 1.0) * t * p - kf * p_prev) / (kf + 1.0);
                    p_prev = p;
                    p = next;
                }
                out[k] = (2.0 * k as f64 + 1.0).sqrt() * p;
            }
        }
    }
}

/// Tensor-product polynomial `phi_index(point) = prod_j phi_{index_j}(point_j)`.
pub fn eval_tensor(spec: &BasisSpec, index: &MultiIndex, point: &Point) -> Result<f64> {
    spec.check_dim(index.dimension())?;
    spec.check_dim(point.dimension())?;
    Ok(index
        .entries()
        .iter()
        .zip(point.coords())
        .map(|(&k, &t)| univariate_unchecked(spec.family(), k as usize, t))
        .product())
}

/// Intrinsic weight `u_i = max{1, sup_t sqrt(nu/mu)(t) |phi_i(t)|}`.
///
/// Exact for CC and LU. For LC this returns the upper bound
/// `(pi/2)^{d/2} (2/sqrt(pi))^{|i|_0}`, which is not attained for every index
/// but cannot be improved uniformly over all indices.
pub fn intrinsic_weight(spec: &BasisSpec, index: &MultiIndex) -> Result<f64> {
    spec.check_dim(index.dimension())?;
    Ok(intrinsic_weight_unchecked(spec.scenario(), index.entries()))
}

pub(crate) fn intrinsic_weight_unchecked(scenario: Scenario, index: &[u32]) -> f64 {
    let nnz = index.iter().filter(|&&k| k != 0).count() as i32;
    let u = match scenario {
        Scenario::CC => 2f64.powf(nnz as f64 / 2.0),
        Scenario::LU => index.iter().map(|&k| (2.0 * k as f64 + 1.0).sqrt()).product(),
        Scenario::LC => {
            let d = index.len() as f64;
            (PI / 2.0).powf(d / 2.0) * FRAC_2_SQRT_PI.powi(nnz)
        }
    };
    u.max(1.0)
}

/// Density ratio `sqrt(nu(t) / mu(t))` used to scale samples.
pub fn measure_density_ratio(spec: &BasisSpec, point: &Point) -> Result<f64> {
    spec.check_dim(point.dimension())?;
    Ok(density_ratio_unchecked(spec.scenario(), point.coords()))
}

pub(crate) fn density_ratio_unchecked(scenario: Scenario, t: &[f64]) -> f64 {
    match scenario {
        Scenario::CC | Scenario::LU => 1.0,
        Scenario::LC => t.iter().map(|&x| (PI / 2.0).sqrt() * (1.0 - x * x).powf(0.25)).product(),
    }
}
