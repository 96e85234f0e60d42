//! Sampling of all randomness: Wiener convolution increments, compound
//! Poisson skeletons, mark models and their compensators.

pub mod dump;
pub mod levy;
pub mod marks;
pub mod path;

pub use levy::{truncate_levy, TruncatedStable};
pub use marks::{compensator_coeffs, power_profile, JumpMultiplier, MagnitudeLaw, MarkModel};
pub use path::{
    compose_convolution, convolution_variance, restrict_path, sample_jump_skeleton,
    sample_wiener_convolutions, CoupledNoisePath, JumpEvent, JumpSkeleton, MicroGrid, NodeKind,
    StepNoise,
};
