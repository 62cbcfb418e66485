//! Proximal policy optimization over the design game.
//!
//! One training cycle collects `horizon` steps from each of `env_count`
//! workers, computes GAE advantages per worker segment, and runs `epochs`
//! passes of clipped-surrogate minibatch updates on separate actor and
//! critic networks.

mod eval;
mod gae;
mod rollout;
mod train;
mod update;

use serde::{Deserialize, Serialize};

pub use eval::{
    evaluate, evaluate_agent, evaluate_agent_logged, EpisodeOutcome, EvalMode, EvalReport, MachineEval, PpoAgent,
    PUBLISHED_STEPS,
};
pub use gae::{gae, gae_explicit};
pub use rollout::{collect_rollout, EnvWorker, EpisodeSummary, RolloutBuffer, Segment, Transition};
pub use train::{init_networks, train, TrainReport, UpdateRow};
pub use update::{clipped_objective, normalize_advantages, ppo_update, UpdateStats};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyperparams {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_ratio: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    /// Steps collected per worker per update.
    pub horizon: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub total_steps: u64,
    pub env_count: usize,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_ratio: 0.2,
            learning_rate: 3e-4,
            epochs: 4,
            minibatch_size: 64,
            horizon: 1024,
            value_coef: 0.5,
            entropy_coef: 0.01,
            max_grad_norm: 0.5,
            total_steps: 400_000,
            env_count: 8,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Validation(format!("hyperparameters: {m}")));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return fail("need 0 < gamma <= 1");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return fail("need 0 <= gae_lambda <= 1");
        }
        if !(self.clip_ratio > 0.0) {
            return fail("need clip_ratio > 0");
        }
        if !(self.learning_rate > 0.0 && self.max_grad_norm > 0.0) {
            return fail("learning_rate and max_grad_norm must be positive");
        }
        if !(self.value_coef >= 0.0 && self.entropy_coef >= 0.0) {
            return fail("loss coefficients must be non-negative");
        }
        if self.epochs == 0
            || self.minibatch_size == 0
            || self.horizon == 0
            || self.env_count == 0
            || self.total_steps == 0
        {
            return fail("all counts must be at least 1");
        }
        Ok(())
    }

    /// Environment steps consumed by one update.
    pub fn batch_size(&self) -> u64 {
        (self.horizon * self.env_count) as u64
    }

    /// Updates needed to consume `total_steps`.
    pub fn update_count(&self) -> u64 {
        self.total_steps.div_ceil(self.batch_size())
    }
}
