//! Random sampling, the normalized measurement matrix and data vectors.
//!
//! Matrix entries are `A[i, j] = phi_j(t_i) sqrt(nu/mu)(t_i) / sqrt(m)`, so that
//! `E[A^T A] = I`, and data are `y_i = sqrt(nu/mu)(t_i) f(t_i) / sqrt(m) + e_i`
//! with `||e|| <= eta / sqrt(m)`.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index_sets::IndexSet;
use crate::poly_basis::{density_ratio_unchecked, univariate_table, BasisSpec, Point, SamplingMeasure};

/// Name of the generator behind every seeded stream in this crate.
pub const RNG_NAME: &str = "ChaCha20Rng (rand_chacha 0.9, seed_from_u64)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    spec: BasisSpec,
    rng_seed: u64,
    points: Vec<Point>,
}

impl SampleSet {
    /// Wraps explicit points, e.g. for deterministic tests.
    pub fn from_points(spec: BasisSpec, points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("a sample set needs at least one point".into()));
        }
        for p in &points {
            if p.dimension() != spec.dimension() {
                return Err(Error::DimensionMismatch { expected: spec.dimension(), found: p.dimension() });
            }
        }
        Ok(SampleSet { spec, rng_seed: 0, points })
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn draw_coordinate(rng: &mut ChaCha20Rng, measure: SamplingMeasure) -> f64 {
    loop {
        let u: f64 = rng.random();
        let t = match measure {
            SamplingMeasure::UniformMeasure => 2.0 * u - 1.0,
            SamplingMeasure::ChebyshevMeasure => (PI * u).cos(),
        };
        // the open interval excludes the endpoint reachable from u = 0
        if t.abs() < 1.0 {
            return t;
        }
    }
}

/// Draws `m` i.i.d. points from the sampling measure of `spec`.
pub fn draw_samples(spec: &BasisSpec, m: usize, rng_seed: u64) -> Result<SampleSet> {
    if m == 0 {
        return Err(Error::InvalidParameter("number of samples must be at least 1".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(rng_seed);
    let d = spec.dimension();
    let points = (0..m)
        .map(|_| {
            let coords = (0..d).map(|_| draw_coordinate(&mut rng, spec.sampling())).collect();
            Point::new(coords)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleSet { spec: *spec, rng_seed, points })
}

/// Per-coordinate tables `phi_k(t_j)` for `k <= max_degree`, laid out
/// `table[j * (max_degree + 1) + k]`.
pub(crate) fn coordinate_tables(spec: &BasisSpec, t: &[f64], max_degree: usize, table: &mut Vec<f64>) {
    let stride = max_degree + 1;
    table.resize(t.len() * stride, 0.0);
    for (j, &tj) in t.iter().enumerate() {
        univariate_table(spec.family(), tj, &mut table[j * stride..(j + 1) * stride]);
    }
}

/// Rows of tensor basis values for the given points, scaled per row by
/// `scale(point)`.
pub(crate) fn basis_rows(
    spec: &BasisSpec,
    points: &[Point],
    index_set: &IndexSet,
    scale: impl Fn(&[f64]) -> f64,
) -> Result<DMatrix<f64>> {
    if index_set.dimension() != spec.dimension() {
        return Err(Error::DimensionMismatch { expected: spec.dimension(), found: index_set.dimension() });
    }
    let max_degree = index_set.max_degree() as usize;
    let stride = max_degree + 1;
    let mut out = DMatrix::zeros(points.len(), index_set.len());
    let mut table = Vec::new();
    for (r, p) in points.iter().enumerate() {
        if p.dimension() != spec.dimension() {
            return Err(Error::DimensionMismatch { expected: spec.dimension(), found: p.dimension() });
        }
        coordinate_tables(spec, p.coords(), max_degree, &mut table);
        let s = scale(p.coords());
        for (c, idx) in index_set.iter().enumerate() {
            let v: f64 = idx.entries().iter().enumerate().map(|(j, &k)| table[j * stride + k as usize]).product();
            out[(r, c)] = v * s;
        }
    }
    Ok(out)
}

/// Normalized measurement matrix with columns in canonical index order.
pub fn assemble_matrix(spec: &BasisSpec, samples: &SampleSet, index_set: &IndexSet) -> Result<DMatrix<f64>> {
    if samples.spec() != spec {
        return Err(Error::InvalidParameter("sample set was drawn for a different basis".into()));
    }
    let inv_sqrt_m = 1.0 / (samples.len() as f64).sqrt();
    let scenario = spec.scenario();
    basis_rows(spec, samples.points(), index_set, |t| density_ratio_unchecked(scenario, t) * inv_sqrt_m)
}

/// Distribution of the noise vector before it is placed in the `eta / sqrt(m)` ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// Uniform direction on the sphere, norm exactly `eta / sqrt(m)`.
    #[default]
    Sphere,
    /// Isotropic Gaussian with expected norm `eta / sqrt(m)`, projected onto the ball.
    GaussianBall,
}

/// Noise vector of length `m` with `||e|| <= eta / sqrt(m)`.
pub fn noise_vector(m: usize, eta: f64, model: NoiseModel, rng_seed: u64) -> DVector<f64> {
    let radius = eta / (m as f64).sqrt();
    if radius == 0.0 {
        return DVector::zeros(m);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(rng_seed);
    let mut e = DVector::from_iterator(m, (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let norm = e.norm();
    match model {
        NoiseModel::Sphere => e *= radius / norm,
        NoiseModel::GaussianBall => {
            e *= radius / (m as f64).sqrt();
            let n = e.norm();
            if n > radius {
                e *= radius / n;
            }
        }
    }
    e
}

/// Scaled data `y_i = sqrt(nu/mu)(t_i) f(t_i) / sqrt(m) + e_i`.
pub fn measure_function<F>(
    f: F,
    samples: &SampleSet,
    noise_eta: f64,
    noise: NoiseModel,
    rng_seed: u64,
) -> Result<DVector<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    if !(noise_eta.is_finite() && noise_eta >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise level must be finite and nonnegative, got {noise_eta}")));
    }
    let m = samples.len();
    let inv_sqrt_m = 1.0 / (m as f64).sqrt();
    let scenario = samples.spec().scenario();
    let mut y = DVector::zeros(m);
    for (i, p) in samples.points().iter().enumerate() {
        let v = f(p.coords());
        if !v.is_finite() {
            return Err(Error::Evaluation(format!("non-finite value {v} at {:?}", p.coords())));
        }
        y[i] = density_ratio_unchecked(scenario, p.coords()) * v * inv_sqrt_m;
    }
    y += noise_vector(m, noise_eta, noise, rng_seed);
    Ok(y)
}

/// A fully assembled truncated measurement problem.
#[derive(Debug, Clone)]
pub struct MeasurementSystem {
    matrix: DMatrix<f64>,
    data: DVector<f64>,
    /// Normalized noise level `eta / sqrt(m)`, the radius of the constraint ball.
    noise_level: f64,
    samples: SampleSet,
    index_set: IndexSet,
}

impl MeasurementSystem {
    /// Samples `f` at the points of `samples` with noise of level `eta`.
    pub fn build<F>(
        samples: SampleSet,
        index_set: IndexSet,
        f: F,
        eta: f64,
        noise: NoiseModel,
        noise_seed: u64,
    ) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64,
    {
        let spec = *samples.spec();
        let matrix = assemble_matrix(&spec, &samples, &index_set)?;
        let data = measure_function(f, &samples, eta, noise, noise_seed)?;
        let noise_level = eta / (samples.len() as f64).sqrt();
        Ok(MeasurementSystem { matrix, data, noise_level, samples, index_set })
    }

    /// System with explicit data, for problems whose data do not come from a
    /// function evaluation.
    pub fn with_data(samples: SampleSet, index_set: IndexSet, data: DVector<f64>, noise_level: f64) -> Result<Self> {
        let spec = *samples.spec();
        let matrix = assemble_matrix(&spec, &samples, &index_set)?;
        if data.len() != samples.len() {
            return Err(Error::DimensionMismatch { expected: samples.len(), found: data.len() });
        }
        Ok(MeasurementSystem { matrix, data, noise_level, samples, index_set })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn data(&self) -> &DVector<f64> {
        &self.data
    }

    pub fn noise_level(&self) -> f64 {
        self.noise_level
    }

    pub fn samples(&self) -> &SampleSet {
        &self.samples
    }

    pub fn index_set(&self) -> &IndexSet {
        &self.index_set
    }

    pub fn spec(&self) -> &BasisSpec {
        self.samples.spec()
    }

    pub fn m(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n(&self) -> usize {
        self.matrix.ncols()
    }

    /// Writes `system.json` (header), `matrix.csv`, `data.csv` and
    /// `index_set.txt` into `dir`.
    pub fn export(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let header = ExportHeader {
            spec: *self.spec(),
            seed: self.samples.seed(),
            rng: RNG_NAME.to_string(),
            m: self.m(),
            n: self.n(),
            eta: self.noise_level * (self.m() as f64).sqrt(),
            eta_normalized: self.noise_level,
        };
        fs::write(dir.join("system.json"), serde_json::to_string_pretty(&header)?)?;

        let mut w = csv::Writer::from_path(dir.join("matrix.csv"))?;
        for r in 0..self.m() {
            w.write_record(self.matrix.row(r).iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join("data.csv"))?;
        w.write_record(["y"])?;
        for v in self.data.iter() {
            w.write_record([format!("{v:e}")])?;
        }
        w.flush()?;
        fs::write(dir.join("index_set.txt"), self.index_set.to_text())?;
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ExportHeader {
    pub spec: BasisSpec,
    pub seed: u64,
    pub rng: String,
    pub m: usize,
    pub n: usize,
    pub eta: f64,
    pub eta_normalized: f64,
}
