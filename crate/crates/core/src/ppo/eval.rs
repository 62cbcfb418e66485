use std::fmt::Write as _;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{play_observed, Agent};
use crate::catalog::{machine, MachineVariant};
use crate::env::{Action, DesignEnv, EpisodeLogRecord, RewardConfig};
use crate::error::{Error, Result};
use crate::neural::{Categorical, Checkpoint, Mlp};

/// Mean PPO steps per machine as published for the three case-study machines.
pub const PUBLISHED_STEPS: [(u8, f64); 3] = [(1, 11.0), (2, 12.0), (3, 5.0)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    /// Most likely action.
    Greedy,
    /// Sample from the policy.
    Stochastic,
}

impl FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" | "greedy-argmax" => Ok(EvalMode::Greedy),
            "stochastic" => Ok(EvalMode::Stochastic),
            other => Err(Error::Validation(format!("unknown evaluation mode `{other}`"))),
        }
    }
}

/// The trained actor as an [`Agent`].
#[derive(Debug, Clone)]
pub struct PpoAgent {
    actor: Mlp,
    mode: EvalMode,
    rng: ChaCha8Rng,
}

impl PpoAgent {
    pub fn new(actor: Mlp, mode: EvalMode, seed: u64) -> Self {
        PpoAgent {
            actor,
            mode,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Agent for PpoAgent {
    fn name(&self) -> &'static str {
        "ppo"
    }

    fn act(&mut self, env: &DesignEnv) -> Result<Action> {
        let dist = Categorical::from_logits(&self.actor.predict(env.observation().as_slice())?);
        let index = match self.mode {
            EvalMode::Greedy => dist.mode(),
            EvalMode::Stochastic => dist.sample(&mut self.rng),
        };
        Action::from_index(index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub episode_index: usize,
    pub machine: u8,
    pub variant: String,
    pub steps: u32,
    pub win: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineEval {
    pub machine: u8,
    pub rated_power_kw: f64,
    pub line_voltage_v: f64,
    pub episodes: usize,
    pub wins: usize,
    pub win_rate: f64,
    /// Mean steps over won episodes; `None` without wins.
    pub mean_steps: Option<f64>,
    /// Mean steps over all episodes, losses counted at the cap.
    pub mean_steps_all: f64,
    pub published_steps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub agent: String,
    pub machines: Vec<MachineEval>,
    pub episodes: Vec<EpisodeOutcome>,
}

impl EvalReport {
    fn from_outcomes(agent: &str, episodes: Vec<EpisodeOutcome>) -> Result<Self> {
        let mut ids: Vec<u8> = episodes.iter().map(|e| e.machine).collect();
        ids.sort_unstable();
        ids.dedup();
        let machines = ids
            .into_iter()
            .map(|id| {
                let m = machine(id)?;
                let mine: Vec<&EpisodeOutcome> = episodes.iter().filter(|e| e.machine == id).collect();
                let won: Vec<f64> = mine.iter().filter(|e| e.win).map(|e| f64::from(e.steps)).collect();
                Ok(MachineEval {
                    machine: id,
                    rated_power_kw: m.rated_power_kw,
                    line_voltage_v: m.line_voltage_v,
                    episodes: mine.len(),
                    wins: won.len(),
                    win_rate: won.len() as f64 / mine.len() as f64,
                    mean_steps: (!won.is_empty()).then(|| won.iter().sum::<f64>() / won.len() as f64),
                    mean_steps_all: mine.iter().map(|e| f64::from(e.steps)).sum::<f64>() / mine.len() as f64,
                    published_steps: PUBLISHED_STEPS.iter().find(|(pid, _)| *pid == id).map(|(_, s)| *s),
                })
            })
            .collect::<Result<_>>()?;
        Ok(EvalReport {
            agent: agent.to_string(),
            machines,
            episodes,
        })
    }

    pub fn machine(&self, id: u8) -> Option<&MachineEval> {
        self.machines.iter().find(|m| m.machine == id)
    }

    /// One row per base machine, our numbers beside the published ones.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let steps_header = format!("mean {} steps", self.agent.to_uppercase());
        let _ = writeln!(
            out,
            "{:<8} {:>9} {:>9} {:>16} {:>9} {:>11} {:>12}",
            "machine", "power", "voltage", steps_header, "win rate", "all steps", "published"
        );
        for m in &self.machines {
            let _ = writeln!(
                out,
                "{:<8} {:>9} {:>9} {:>16} {:>9.3} {:>11.2} {:>12}",
                m.machine,
                format!("{} kW", m.rated_power_kw),
                format!("{} V", m.line_voltage_v),
                m.mean_steps.map_or("-".to_string(), |s| format!("{s:.2}")),
                m.win_rate,
                m.mean_steps_all,
                m.published_steps.map_or("-".to_string(), |s| format!("{s}")),
            );
        }
        out
    }

    /// Per-episode series: `episode_index,steps,win`.
    pub fn episodes_csv(&self) -> String {
        let mut out = String::from("episode_index,steps,win\n");
        for e in &self.episodes {
            let _ = writeln!(out, "{},{},{}", e.episode_index, e.steps, u8::from(e.win));
        }
        out
    }
}

/// Plays `episodes_per_variant` episodes on every variant, in variant order.
pub fn evaluate_agent(
    agent: &mut dyn Agent,
    variants: &[MachineVariant],
    episodes_per_variant: usize,
    reward: &RewardConfig,
) -> Result<EvalReport> {
    evaluate_agent_logged(agent, variants, episodes_per_variant, reward, &mut |_| {})
}

/// [`evaluate_agent`], emitting a log record for every step.
pub fn evaluate_agent_logged(
    agent: &mut dyn Agent,
    variants: &[MachineVariant],
    episodes_per_variant: usize,
    reward: &RewardConfig,
    log: &mut dyn FnMut(EpisodeLogRecord),
) -> Result<EvalReport> {
    if variants.is_empty() || episodes_per_variant == 0 {
        return Err(Error::Validation(
            "evaluation needs variants and at least one episode".into(),
        ));
    }
    let mut env = DesignEnv::new(reward.clone())?;
    let mut outcomes = Vec::with_capacity(variants.len() * episodes_per_variant);
    for variant in variants {
        for _ in 0..episodes_per_variant {
            env.reset(variant)?;
            let episode = outcomes.len() as u64;
            let record = play_observed(&mut env, agent, &mut |step| {
                log(EpisodeLogRecord::new(episode, variant, step))
            })?;
            outcomes.push(EpisodeOutcome {
                episode_index: outcomes.len(),
                machine: variant.base_id,
                variant: variant.label(),
                steps: record.steps(),
                win: record.won(),
            });
        }
    }
    EvalReport::from_outcomes(agent.name(), outcomes)
}

/// Evaluates the checkpoint's actor with frozen parameters.
pub fn evaluate(
    checkpoint: &Checkpoint,
    variants: &[MachineVariant],
    episodes_per_variant: usize,
    mode: EvalMode,
    seed: u64,
    reward: &RewardConfig,
) -> Result<EvalReport> {
    let mut agent = PpoAgent::new(checkpoint.actor.clone(), mode, seed);
    evaluate_agent(&mut agent, variants, episodes_per_variant, reward)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::GreedyAgent;
    use crate::catalog::standard_catalog;

    #[test]
    fn report_shape() {
        let variants = standard_catalog(2, &[1, 3]).unwrap();
        let report = evaluate_agent(&mut GreedyAgent, &variants[..4], 2, &RewardConfig::default()).unwrap();
        assert_eq!(report.episodes.len(), 8);
        assert_eq!(report.episodes_csv().lines().count(), 9);
        assert_eq!(report.machines.len(), 1);
        assert!(report.table().contains("2500 kW"));
        assert_eq!(report.machine(1).unwrap().published_steps, Some(11.0));
    }
}
