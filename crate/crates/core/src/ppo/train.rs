use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::MachineVariant;
use crate::env::{DoneCause, RewardConfig, NUM_ACTIONS, OBS_DIM};
use crate::error::{Error, Result};
use crate::neural::{layer_sizes, AdamState, Checkpoint, Mlp};

use super::{collect_rollout, evaluate, ppo_update, EnvWorker, EvalMode, EvalReport, Hyperparams};

/// One metrics line per update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateRow {
    pub update: u64,
    pub env_steps: u64,
    pub episodes: usize,
    pub win_rate: f64,
    pub mean_episode_reward: f64,
    pub mean_steps_to_win: Option<f64>,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub rows: Vec<UpdateRow>,
    /// Greedy evaluation of the final actor on the training variants.
    pub final_eval: EvalReport,
    pub seconds: f64,
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    seed.wrapping_mul(6_364_136_223_846_793_005)
        .wrapping_add(a.wrapping_mul(1_442_695_040_888_963_407))
        .wrapping_add(b)
}

/// Fresh actor and critic, Glorot-initialized from `seed`.
pub fn init_networks(seed: u64) -> Result<(Mlp, Mlp)> {
    Ok((
        Mlp::init(&layer_sizes(OBS_DIM, NUM_ACTIONS), mix(seed, 1, 0))?,
        Mlp::init(&layer_sizes(OBS_DIM, 1), mix(seed, 2, 0))?,
    ))
}

/// Runs `hyper.update_count()` collect/update cycles. With `resume`, the
/// networks and optimizer state continue from the checkpoint and update
/// numbering carries on from it; workers start new episodes.
pub fn train(
    variants: &[MachineVariant],
    hyper: &Hyperparams,
    reward: &RewardConfig,
    resume: Option<Checkpoint>,
    mut on_update: impl FnMut(&UpdateRow),
) -> Result<(Checkpoint, TrainReport)> {
    hyper.validate()?;
    reward.validate()?;
    if variants.is_empty() {
        return Err(Error::Validation("training needs at least one variant".into()));
    }
    let started = Instant::now();
    let mut ckpt = match resume {
        Some(c) => c,
        None => {
            let (actor, critic) = init_networks(hyper.seed)?;
            Checkpoint {
                actor_adam: AdamState::new(&actor, hyper.learning_rate),
                critic_adam: AdamState::new(&critic, hyper.learning_rate),
                actor,
                critic,
                updates: 0,
                env_steps: 0,
            }
        }
    };
    if ckpt.actor.sizes() != layer_sizes(OBS_DIM, NUM_ACTIONS) || ckpt.critic.sizes() != layer_sizes(OBS_DIM, 1) {
        return Err(Error::Validation(
            "checkpoint network shapes do not match the design game".into(),
        ));
    }
    ckpt.actor_adam.learning_rate = hyper.learning_rate;
    ckpt.critic_adam.learning_rate = hyper.learning_rate;

    let shared: Arc<[MachineVariant]> = variants.to_vec().into();
    let first_update = ckpt.updates;
    let mut workers = (0..hyper.env_count)
        .map(|i| {
            EnvWorker::new(
                shared.clone(),
                reward.clone(),
                i,
                hyper.env_count,
                mix(hyper.seed, 100 + i as u64, first_update),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for _ in 0..hyper.update_count() {
        let update = ckpt.updates + 1;
        let buffer = collect_rollout(&mut workers, &ckpt.actor, &ckpt.critic, hyper.horizon)?;
        let mut rng = ChaCha8Rng::seed_from_u64(mix(hyper.seed, 7, update));
        let stats = ppo_update(
            &mut ckpt.actor,
            &mut ckpt.critic,
            &mut ckpt.actor_adam,
            &mut ckpt.critic_adam,
            &buffer,
            hyper,
            update,
            &mut rng,
        )?;
        ckpt.updates = update;
        ckpt.env_steps += buffer.len() as u64;

        let episodes: Vec<_> = buffer.episodes().collect();
        let wins: Vec<f64> = episodes
            .iter()
            .filter(|e| e.cause == DoneCause::Win)
            .map(|e| f64::from(e.steps))
            .collect();
        let n = episodes.len();
        let row = UpdateRow {
            update,
            env_steps: ckpt.env_steps,
            episodes: n,
            win_rate: if n == 0 { 0.0 } else { wins.len() as f64 / n as f64 },
            mean_episode_reward: if n == 0 {
                0.0
            } else {
                episodes.iter().map(|e| e.total_reward).sum::<f64>() / n as f64
            },
            mean_steps_to_win: (!wins.is_empty()).then(|| wins.iter().sum::<f64>() / wins.len() as f64),
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
            clip_fraction: stats.clip_fraction,
            approx_kl: stats.approx_kl,
        };
        on_update(&row);
        rows.push(row);
    }

    let final_eval = evaluate(&ckpt, variants, 1, EvalMode::Greedy, hyper.seed, reward)?;
    Ok((
        ckpt,
        TrainReport {
            rows,
            final_eval,
            seconds: started.elapsed().as_secs_f64(),
        },
    ))
}
