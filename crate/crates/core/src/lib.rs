//! Numerical laboratory for spherical dust collapse and its stochastic extension.
//!
//! The crate is organised by layer:
//!
//! * [`equilibrium`]: interior Schwarzschild pressure, Buchdahl limit, Lane–Emden polytropes.
//! * [`collapse`]: the deterministic collapse (cycloid, density-function ODE, implicit
//!   time-density relation, Kretschmann scalar).
//! * [`sde`]: reproducible Brownian drivers and Itô / Stratonovich path integrators for the
//!   hybrid ODE→SDE system.
//! * [`analysis`]: martingale, moment, inequality, explosion, Lyapunov and first-passage
//!   suites that turn ensembles into [`analysis::AnalysisReport`]s.
//! * [`fokker_planck`]: density-level solver, stationary densities, moment ODEs,
//!   Onsager–Machlup action and the Hermite generating function.
//! * [`pipeline`]: JSON run configuration, batch orchestration and regression diffs.

pub mod analysis;
pub mod collapse;
pub mod equilibrium;
pub mod error;
pub mod fokker_planck;
pub mod ode;
pub mod params;
pub mod pipeline;
pub mod quadrature;
pub mod rng;
pub mod sde;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use params::ModelParams;

/// Version string written next to every output artifact.
pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));
