//! Spectral Galerkin simulation of the stochastic heat equation on (0, 1)
//! with Dirichlet boundaries, driven by space-time white noise and a
//! compound Poisson random measure, plus convergence-order experiments.

pub mod error;
pub mod experiments;
pub mod noise;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod schemes;
pub mod spectral;

pub use error::{Error, Result};
