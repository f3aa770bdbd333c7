//! Learned reward models over one-hot state inputs.

mod adam;
mod checkpoint;
mod ensemble;
mod loss;
mod mlp;
mod norm;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{RewardCheckpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use ensemble::{bootstrap_indices, ensemble_reward, FrozenReward, RewardEnsemble, RewardMember};
pub use loss::{logistic, nll_gradient, softplus, LabeledPair};
pub use mlp::MlpParams;
pub use norm::{EmaNorm, RunningNorm, NORM_STD_FLOOR};

use crate::env::{TabularMdp, Transition};

/// Anything that assigns a reward to a transition.
pub trait RewardSource {
    fn reward(&self, t: &Transition) -> f64;
}

impl<F: Fn(&Transition) -> f64> RewardSource for F {
    fn reward(&self, t: &Transition) -> f64 {
        self(t)
    }
}

/// The environment's own reward, for oracles and evaluation only.
#[derive(Clone, Copy)]
pub struct GroundTruth<'a>(pub &'a TabularMdp);

impl RewardSource for GroundTruth<'_> {
    fn reward(&self, t: &Transition) -> f64 {
        self.0.gt_reward()[t.next_state]
    }
}
