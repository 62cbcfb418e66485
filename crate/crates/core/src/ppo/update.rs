use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{adam_step, AdamState, Categorical, Grads, Mlp};

use super::{Hyperparams, RolloutBuffer};

/// Per-sample PPO objective `min(r A, clip(r, 1 - eps, 1 + eps) A)`.
/// Returns the objective and whether the clipped branch was taken.
pub fn clipped_objective(ratio: f64, advantage: f64, clip: f64) -> (f64, bool) {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip) * advantage;
    if unclipped <= clipped {
        (unclipped, false)
    } else {
        (clipped, true)
    }
}

/// Shifts to zero mean and scales to unit variance (population variance,
/// `1e-8` guard on the standard deviation).
pub fn normalize_advantages(advantages: &mut [f64]) {
    let n = advantages.len();
    if n == 0 {
        return;
    }
    let mean = advantages.iter().sum::<f64>() / n as f64;
    let var = advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n as f64;
    let std = var.sqrt() + 1e-8;
    for a in advantages {
        *a = (*a - mean) / std;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// Share of samples whose ratio left `[1 - eps, 1 + eps]`.
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub minibatches: usize,
}

/// `epochs` passes of shuffled minibatch updates on actor and critic.
/// Losses in the stats are averaged over all minibatches.
#[allow(clippy::too_many_arguments)]
pub fn ppo_update<R: Rng + ?Sized>(
    actor: &mut Mlp,
    critic: &mut Mlp,
    actor_adam: &mut AdamState,
    critic_adam: &mut AdamState,
    buffer: &RolloutBuffer,
    hyper: &Hyperparams,
    update_index: u64,
    rng: &mut R,
) -> Result<UpdateStats> {
    if buffer.is_empty() {
        return Err(Error::ContractViolation("ppo_update on an empty buffer".into()));
    }
    let samples: Vec<_> = buffer.transitions().collect();
    let (mut advantages, returns) = buffer.advantages(hyper.gamma, hyper.gae_lambda);
    normalize_advantages(&mut advantages);

    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut actor_grads = Grads::zeros_like(actor);
    let mut critic_grads = Grads::zeros_like(critic);
    let mut stats = UpdateStats::default();
    let mut clipped_samples = 0usize;
    let mut seen = 0usize;

    for _ in 0..hyper.epochs {
        order.shuffle(rng);
        for batch in order.chunks(hyper.minibatch_size) {
            actor_grads.fill_zero();
            critic_grads.fill_zero();
            let scale = 1.0 / batch.len() as f64;
            let (mut policy_loss, mut value_loss, mut entropy, mut kl) = (0.0, 0.0, 0.0, 0.0);

            for &i in batch {
                let t = samples[i];
                let adv = advantages[i];
                let obs = t.observation.as_slice();

                let fwd = actor.forward(obs)?;
                let dist = Categorical::from_logits(&fwd.output);
                let log_prob = dist.log_prob(t.action);
                let ratio = (log_prob - t.log_prob).exp();
                let (objective, took_clip) = clipped_objective(ratio, adv, hyper.clip_ratio);
                if (ratio - 1.0).abs() > hyper.clip_ratio {
                    clipped_samples += 1;
                }
                let h = dist.entropy();
                policy_loss -= objective;
                entropy += h;
                kl += t.log_prob - log_prob;

                // d(-objective)/d log_prob is -ratio * A on the unclipped
                // branch and zero on the clipped one.
                let d_log_prob = if took_clip { 0.0 } else { -ratio * adv };
                let lp_grad = dist.log_prob_grad(t.action);
                let h_grad = dist.entropy_grad();
                let logits_grad: Vec<f64> = lp_grad
                    .iter()
                    .zip(&h_grad)
                    .map(|(g_lp, g_h)| scale * (d_log_prob * g_lp - hyper.entropy_coef * g_h))
                    .collect();
                actor.backward_into(&fwd.cache, &logits_grad, &mut actor_grads)?;

                let vf = critic.forward(obs)?;
                let err = vf.output[0] - returns[i];
                value_loss += err * err;
                critic.backward_into(&vf.cache, &[scale * hyper.value_coef * 2.0 * err], &mut critic_grads)?;
            }
            seen += batch.len();
            policy_loss *= scale;
            value_loss *= scale;
            entropy *= scale;
            let total = policy_loss + hyper.value_coef * value_loss - hyper.entropy_coef * entropy;
            if !total.is_finite() {
                return Err(Error::TrainingDiverged {
                    update: update_index,
                    detail: format!(
                        "non-finite loss (policy {policy_loss}, value {value_loss}, entropy {entropy}) at minibatch {}",
                        stats.minibatches
                    ),
                });
            }
            actor_grads.clip_global_norm(hyper.max_grad_norm);
            critic_grads.clip_global_norm(hyper.max_grad_norm);
            adam_step(actor, &actor_grads, actor_adam).map_err(|e| with_update(e, update_index))?;
            adam_step(critic, &critic_grads, critic_adam).map_err(|e| with_update(e, update_index))?;

            stats.policy_loss += policy_loss;
            stats.value_loss += value_loss;
            stats.entropy += entropy;
            stats.approx_kl += kl * scale;
            stats.minibatches += 1;
        }
    }
    let m = stats.minibatches as f64;
    stats.policy_loss /= m;
    stats.value_loss /= m;
    stats.entropy /= m;
    stats.approx_kl /= m;
    stats.clip_fraction = clipped_samples as f64 / seen as f64;
    Ok(stats)
}

fn with_update(err: Error, update: u64) -> Error {
    match err {
        Error::TrainingDiverged { detail, .. } => Error::TrainingDiverged { update, detail },
        other => other,
    }
}
