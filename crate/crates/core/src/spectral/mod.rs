//! Kernel smoothing in Fourier space, inversion to the x-domain, and the
//! tail-integral estimator.

mod kernel;
mod tail;

pub use kernel::{bandwidth, kernel_fk, kernel_k1, KernelKind, KernelSpec};
pub use tail::{
    smoothed_weighted_density, tail_curve, tail_integral_estimate, GridPlan, SpectralConfig, TailCurve, TailEstimate,
};
