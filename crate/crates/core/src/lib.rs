//! Positive, axis-monotone solutions of the Neumann problem
//! `-Δu + u = a(x) f(u)` on domains of m revolution.
//!
//! A field that depends only on the block radii `t_1, …, t_m` of
//! `ℝ^N = ℝ^{n_1} × … × ℝ^{n_m}` reduces to a function on the unit cube
//! `(0,1)^m` with measure `∏ t_k^{n_k-1} dt_k`. The solver works entirely in
//! those reduced coordinates, restricted to the cone of nonnegative functions
//! that are nondecreasing along every axis. On that cone the embedding range
//! is governed by `m` instead of `N`, which is what makes supercritical
//! exponents tractable.
//!
//! The critical-point search targets the dual energy
//!
//! ```text
//! I(u) = ∫ a F*((-Δu + u) / a) dμ  -  ∫ a F(u) dμ
//! ```
//!
//! where `F*` is the Fenchel conjugate of the primitive `F` of `f`.
//!
//! Module map:
//!
//! * [`convex`]: the scalar nonlinearity, its conjugate and assumption checks.
//! * [`domain`]: revolution specs, cell-centered grids, quadrature and norms.
//! * [`cone`]: cone membership, projection (Dykstra + PAVA) and mollification.
//! * [`elliptic`]: the weighted Neumann operator and its CG solve.
//! * [`energy`]: the dual energy, its pieces and the consistency gap.
//! * [`solver`]: scaled inverse iteration and the mountain-pass descent.
//! * [`verify`]: property checks binding the discrete objects to the theory.
//! * [`cli`]: JSON configuration and the batch front end.

pub mod cli;
pub mod cone;
pub mod convex;
pub mod domain;
pub mod elliptic;
pub mod energy;
mod error;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};

pub use cone::{in_cone, mollify, project_cone, ConeReport};
pub use convex::{AssumptionReport, Nonlinearity, NonlinearityKind};
pub use domain::{Grid, GridFunction, Measure, RevolutionSpec};
pub use elliptic::{CgOptions, LinearResidual, WeightedOperator};
pub use energy::{EnergyReport, Extended, Problem, ProblemOptions};
pub use solver::{Method, SolveReport, SolverConfig};

/// Crate version string embedded in every emitted report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
