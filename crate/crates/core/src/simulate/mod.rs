//! Simulation of unit-time increment panels and the exact characteristic
//! function used as a noise-free reference.

mod exact;
mod panel;
mod rng;
pub(crate) mod sampler;

pub use exact::{exact_charfn, ExactCharFn, ExponentDerivs};
pub use panel::IncrementPanel;
pub use rng::stream_rng;
pub use sampler::ModelSampler;

use rand::Rng;

use crate::error::{Error, Result};
use crate::levy_model::LevyModelSpec;

/// Draws `n` increments with a prepared sampler from `rng`.
pub fn sample_with<R: Rng + ?Sized>(sampler: &ModelSampler, n: usize, rng: &mut R) -> Vec<[f64; 2]> {
    (0..n).map(|_| sampler.draw(rng).0).collect()
}

/// `n` increments of `model` from stream 0 of `seed`.
pub fn sample_increments(model: &LevyModelSpec, n: usize, seed: u64) -> Result<IncrementPanel> {
    sample_stream(model, n, seed, 0)
}

/// `n` increments from stream `index` of `seed`.
pub fn sample_stream(model: &LevyModelSpec, n: usize, seed: u64, index: u64) -> Result<IncrementPanel> {
    if n == 0 {
        return Err(Error::InvalidParameter("the sample size must be at least 1".into()));
    }
    let sampler = ModelSampler::new(model)?;
    let mut rng = stream_rng(seed, index);
    let z = sample_with(&sampler, n, &mut rng);
    IncrementPanel::new(z, seed, model.label(), sampler.epsilon)
}
