//! Levy measures on the positive quadrant, model triplets, and reference
//! values computed by quadrature.

pub mod config;
pub mod decay;
pub mod density;
pub mod model;
pub mod truth;

pub use config::{DensityConfig, ModelConfig};
pub use decay::{appendix_constant, check_fourier_decay, AppendixTerms, DecayReport, WeightedFourier};
pub use density::{cutoff, make_density, DensityKind, DensityParams, Intensity, JumpDensitySpec, PointMass};
pub use model::{LevyModelSpec, Representation, DEFAULT_SMALL_JUMP_EPSILON};
pub use truth::{
    copula_truth, cpp_copula_truth, cpp_joint_cdf_truth, levy_copula_truth, marginal_inverse_truth,
    marginal_tail_truth, tail_integral_truth, TruthTables, DEFAULT_TRUTH_TOL,
};
