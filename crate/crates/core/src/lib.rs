//! Suprema of generalized risk processes `X = Y - C` killed at an independent
//! exponential time.
//!
//! The crate has two halves that are meant to be confronted with each other:
//!
//! * an analytic half ([`model`], [`fluctuation`], [`pk_engine`]) that evaluates
//!   Laplace exponents, their inverses, ladder quantities and the geometric
//!   compound (Pollaczek-Khinchine) law of the dual supremum on a grid;
//! * a Monte Carlo half ([`simulator`], [`stats`]) that simulates killed paths
//!   with exact jump events, splits the dual supremum at the modified ladder
//!   epochs and measures how well the analytic laws describe the samples.
//!
//! The analytic core is generic over the scalar type (see [`Real`]); the
//! simulator works in `f64`. The aliases below fix the scalar to `f64`.

pub mod error;
pub mod fluctuation;
pub mod model;
pub mod pk_engine;
pub mod quadrature;
mod real;
pub mod simulator;
pub mod stats;

pub use error::{Error, Result};
pub use real::Real;

pub type JumpDistribution = model::JumpDistribution<f64>;
pub type CompoundPoisson = model::CompoundPoisson<f64>;
pub type SubordinatorSpec = model::SubordinatorSpec<f64>;
pub type PerturbationSpec = model::PerturbationSpec<f64>;
pub type ModelSpec = model::ModelSpec<f64>;
pub type RootResult = fluctuation::RootResult<f64>;
pub type LadderContext = fluctuation::LadderContext<f64>;
pub type GridDistribution = pk_engine::GridDistribution<f64>;
pub type PkParameters = pk_engine::PkParameters<f64>;
pub use stats::EmpiricalCdf;

/// Single-precision variants of the analytic types.
pub type ModelSpec32 = model::ModelSpec<f32>;
pub type LadderContext32 = fluctuation::LadderContext<f32>;
pub type GridDistribution32 = pk_engine::GridDistribution<f32>;
