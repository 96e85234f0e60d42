//! Convergence-order studies on exactly coupled multi-resolution paths.

pub mod plan;
pub mod stats;
pub mod studies;

pub use plan::{Axis, JumpSpec, LawSpec, MultiplierSpec, ProfileSpec, Reference, StudyPlan};
pub use stats::{estimate_lp_error, fit_order, LpEstimate, OrderFit};
pub use studies::{
    run_holder_study, run_spatial_study, run_study, run_temporal_study, LevelError, OrderReport, StudyOutcome,
};
