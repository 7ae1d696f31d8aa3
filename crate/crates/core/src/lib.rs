//! Bayesian sequential test for the sign of the drift of a fractional
//! Brownian motion.
//!
//! The observation `Z_t = θt + B^H_t` is whitened into a Brownian
//! observation, the posterior of θ is tracked through `(a_t, b_t)`, and after
//! a deterministic time change the optimal rule stops when the normalised
//! posterior mean leaves the band `|x| < A(r)`. [`boundary`] solves for `A`,
//! [`testbench`] runs the rule and estimates its risk by Monte Carlo.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the usual double-precision choice.

// `!(x > 0)` is used on purpose throughout: it also rejects NaN. Reference
// constants keep the digits they were published or computed with.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod boundary;
pub mod error;
pub mod fbm_sim;
pub mod model;
pub mod real;
pub mod specfun;
pub mod testbench;
pub mod whitening;

pub use boundary::{solve_boundary, BoundaryTable, SolveOptions};
pub use error::{Error, Result};
pub use fbm_sim::{DrawnScenario, SamplePath, ThetaMode};
pub use model::{DerivedConstants, Model, ModelParams};
pub use real::Real;
pub use testbench::{RiskReport, TestOutcome, ValueRiskEstimate};
pub use whitening::PosteriorTrajectory;

pub type Model64 = Model<f64>;
pub type ModelParams64 = ModelParams<f64>;
pub type BoundaryTable64 = BoundaryTable<f64>;
pub type SolveOptions64 = SolveOptions<f64>;
pub type SamplePath64 = SamplePath<f64>;
pub type RiskReport64 = RiskReport<f64>;

pub type Model32 = Model<f32>;
pub type ModelParams32 = ModelParams<f32>;
pub type BoundaryTable32 = BoundaryTable<f32>;
pub type SolveOptions32 = SolveOptions<f32>;
pub type SamplePath32 = SamplePath<f32>;
pub type RiskReport32 = RiskReport<f32>;
