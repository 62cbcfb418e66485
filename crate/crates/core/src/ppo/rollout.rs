use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::catalog::MachineVariant;
use crate::env::{DesignEnv, DoneCause, Observation, RewardConfig};
use crate::error::{Error, Result};
use crate::neural::{Categorical, Mlp};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observation: Observation,
    pub action: usize,
    /// Log-probability of `action` under the policy that chose it.
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
    pub done: bool,
    pub cause: Option<DoneCause>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSummary {
    pub variant: String,
    pub base_id: u8,
    pub steps: u32,
    pub total_reward: f64,
    pub cause: DoneCause,
}

/// One worker's contiguous slice of a rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub transitions: Vec<Transition>,
    /// Critic value of the state after the last transition; 0 when that
    /// transition ended an episode.
    pub bootstrap: f64,
    /// Episodes that finished inside this segment.
    pub episodes: Vec<EpisodeSummary>,
}

/// Segments in worker order.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBuffer {
    pub segments: Vec<Segment>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.segments.iter().map(|s| s.transitions.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn transitions(&self) -> impl Iterator<Item = &Transition> {
        self.segments.iter().flat_map(|s| &s.transitions)
    }

    pub fn episodes(&self) -> impl Iterator<Item = &EpisodeSummary> {
        self.segments.iter().flat_map(|s| &s.episodes)
    }

    /// GAE per segment, concatenated in buffer order.
    pub fn advantages(&self, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
        let mut advantages = Vec::with_capacity(self.len());
        let mut returns = Vec::with_capacity(self.len());
        for seg in &self.segments {
            let rewards: Vec<f64> = seg.transitions.iter().map(|t| t.reward).collect();
            let values: Vec<f64> = seg.transitions.iter().map(|t| t.value).collect();
            let dones: Vec<bool> = seg.transitions.iter().map(|t| t.done).collect();
            let (a, r) = super::gae(&rewards, &values, &dones, seg.bootstrap, gamma, lambda);
            advantages.extend(a);
            returns.extend(r);
        }
        (advantages, returns)
    }
}

/// An environment plus its sampling stream and variant schedule. Worker
/// `i` of `n` plays variants `i, i + n, i + 2n, ...` (mod the variant
/// count), moving on at every episode end.
#[derive(Debug, Clone)]
pub struct EnvWorker {
    env: DesignEnv,
    variants: Arc<[MachineVariant]>,
    cursor: usize,
    stride: usize,
    rng: ChaCha8Rng,
    observation: Observation,
    episode_reward: f64,
}

impl EnvWorker {
    pub fn new(
        variants: Arc<[MachineVariant]>,
        reward: RewardConfig,
        worker: usize,
        worker_count: usize,
        seed: u64,
    ) -> Result<Self> {
        if variants.is_empty() {
            return Err(Error::Validation("training needs at least one variant".into()));
        }
        let mut env = DesignEnv::new(reward)?;
        let cursor = worker % variants.len();
        let observation = env.reset(&variants[cursor])?;
        Ok(EnvWorker {
            env,
            variants,
            cursor,
            stride: worker_count.max(1),
            rng: ChaCha8Rng::seed_from_u64(seed),
            observation,
            episode_reward: 0.0,
        })
    }

    pub fn env(&self) -> &DesignEnv {
        &self.env
    }

    fn collect(&mut self, actor: &Mlp, critic: &Mlp, horizon: usize) -> Result<Segment> {
        let mut transitions = Vec::with_capacity(horizon);
        let mut episodes = Vec::new();
        for _ in 0..horizon {
            let obs = self.observation;
            let dist = Categorical::from_logits(&actor.predict(obs.as_slice())?);
            let action = dist.sample(&mut self.rng);
            let value = critic.predict(obs.as_slice())?[0];
            let step = self.env.step(crate::env::Action::from_index(action)?)?;
            self.episode_reward += step.reward;
            transitions.push(Transition {
                observation: obs,
                action,
                log_prob: dist.log_prob(action),
                reward: step.reward,
                value,
                done: step.done,
                cause: step.info.cause,
            });
            if let Some(cause) = step.info.cause {
                let variant = self.env.variant();
                episodes.push(EpisodeSummary {
                    variant: variant.label(),
                    base_id: variant.base_id,
                    steps: step.info.step,
                    total_reward: self.episode_reward,
                    cause,
                });
                self.episode_reward = 0.0;
                self.cursor = (self.cursor + self.stride) % self.variants.len();
                self.observation = self.env.reset(&self.variants[self.cursor])?;
            } else {
                self.observation = step.observation;
            }
        }
        let ended = transitions.last().is_some_and(|t| t.done);
        let bootstrap = if ended {
            0.0
        } else {
            critic.predict(self.observation.as_slice())?[0]
        };
        Ok(Segment {
            transitions,
            bootstrap,
            episodes,
        })
    }
}

/// Runs every worker for `horizon` steps with frozen parameters. Workers
/// run on their own threads and the segments are returned in worker
/// order, so the result depends only on the workers' states and the
/// parameters.
pub fn collect_rollout(workers: &mut [EnvWorker], actor: &Mlp, critic: &Mlp, horizon: usize) -> Result<RolloutBuffer> {
    if horizon == 0 {
        return Err(Error::ContractViolation("rollout horizon must be at least 1".into()));
    }
    let segments = if workers.len() == 1 {
        vec![workers[0].collect(actor, critic, horizon)]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = workers
                .iter_mut()
                .map(|w| scope.spawn(move || w.collect(actor, critic, horizon)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("rollout worker panicked"))
                .collect::<Vec<_>>()
        })
    };
    Ok(RolloutBuffer {
        segments: segments.into_iter().collect::<Result<_>>()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::standard_catalog;
    use crate::env::{reward_for, Action};
    use crate::neural::layer_sizes;

    fn workers(n: usize, seed: u64) -> Vec<EnvWorker> {
        let variants: Arc<[MachineVariant]> = standard_catalog(1, &[1, 2]).unwrap().into();
        (0..n)
            .map(|i| EnvWorker::new(variants.clone(), RewardConfig::default(), i, n, seed + i as u64).unwrap())
            .collect()
    }

    fn nets() -> (Mlp, Mlp) {
        (
            Mlp::init(&layer_sizes(11, 6), 1).unwrap(),
            Mlp::init(&layer_sizes(11, 1), 2).unwrap(),
        )
    }

    #[test]
    fn single_step_single_env() {
        let (a, c) = nets();
        let buf = collect_rollout(&mut workers(1, 0), &a, &c, 1).unwrap();
        assert_eq!(buf.len(), 1);
    }

    #[test]
    fn size_and_determinism() {
        let (a, c) = nets();
        let x = collect_rollout(&mut workers(3, 4), &a, &c, 400).unwrap();
        let y = collect_rollout(&mut workers(3, 4), &a, &c, 400).unwrap();
        assert_eq!(x.len(), 1200);
        assert_eq!(x, y);
        assert!(x.episodes().count() > 0);
    }

    #[test]
    fn behaviour_log_probs_match_actor() {
        let (a, c) = nets();
        let buf = collect_rollout(&mut workers(2, 9), &a, &c, 300).unwrap();
        for t in buf.transitions() {
            let d = Categorical::from_logits(&a.predict(t.observation.as_slice()).unwrap());
            assert!((d.log_prob(t.action) - t.log_prob).abs() < 1e-12);
            assert!(t.log_prob <= 0.0);
        }
    }

    #[test]
    fn stored_rewards_replay() {
        // Replaying each segment's actions on a fresh env gives the same rewards.
        let (a, c) = nets();
        let mut ws = workers(1, 5);
        let variants = ws[0].variants.clone();
        let buf = collect_rollout(&mut ws, &a, &c, 700).unwrap();
        let mut env = DesignEnv::new(RewardConfig::default()).unwrap();
        let mut cursor = 0;
        env.reset(&variants[cursor]).unwrap();
        for t in buf.transitions() {
            let s = env.step(Action::from_index(t.action).unwrap()).unwrap();
            let info = &s.info;
            let shaping = if info.prev_flags.is_clear() {
                0.0
            } else {
                reward_for(
                    &info.prev_performance,
                    &info.performance,
                    &info.prev_flags,
                    &env.variant().target_bands,
                    env.config(),
                )
            };
            let expected = shaping
                + if info.revisit { -2.0 } else { 0.0 }
                + if info.cause == Some(DoneCause::Win) { 100.0 } else { 0.0 };
            assert_eq!(s.reward, t.reward);
            assert_eq!(expected, t.reward);
            if s.done {
                cursor = (cursor + 1) % variants.len();
                env.reset(&variants[cursor]).unwrap();
            }
        }
    }
}
