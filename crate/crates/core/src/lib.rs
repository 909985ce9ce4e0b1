//! Function interpolation by weighted `l^1` minimization over orthonormal
//! polynomial expansions.
//!
//! A function on `(-1, 1)^d` is sampled at random points, the samples are
//! fitted by a weighted basis pursuit problem over a finite index set, and
//! the result is compared with quadrature coefficients and a dense grid.

pub mod error;
pub mod experiments;
pub mod guarantees;
pub mod index_sets;
pub mod measurement;
pub mod poly_basis;
pub mod quadrature;
pub mod reconstruction;
pub mod solver;
pub mod weights;

pub use error::{Error, Result};
pub use index_sets::{IndexSet, IndexSetKind, MultiIndex};
pub use measurement::{MeasurementSystem, NoiseModel, SampleSet};
pub use poly_basis::{BasisSpec, Family, Point, SamplingMeasure, Scenario};
pub use reconstruction::{ErrorReport, TargetFunction};
pub use solver::{solve_lp_oracle, solve_weighted_bpdn, SolveResult, SolverOptions};
pub use weights::{WeightStrategy, WeightVector};
