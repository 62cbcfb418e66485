//! Run configuration: every knob of a training or evaluation run.
//!
//! Stored as TOML. Unknown keys are rejected; missing keys take defaults.
//!
//! ```toml
//! catalog_seed = 2024
//! out_dir = "runs/default"
//! eval_episodes = 20
//! eval_mode = "stochastic"
//! eval_seed = 1
//!
//! [hyper]
//! total_steps = 400000
//! seed = 0
//!
//! [reward]
//! w_win = 100.0
//! max_steps = 300
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::RewardConfig;
use crate::error::{Error, Result};
use crate::ppo::{EvalMode, Hyperparams};

pub const DEFAULT_CATALOG_SEED: u64 = 2024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub catalog_seed: u64,
    /// Catalog file; generated from `catalog_seed` when absent.
    pub catalog: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub eval_episodes: usize,
    pub eval_mode: EvalMode,
    pub eval_seed: u64,
    pub hyper: Hyperparams,
    pub reward: RewardConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            catalog_seed: DEFAULT_CATALOG_SEED,
            catalog: None,
            out_dir: PathBuf::from("runs/default"),
            eval_episodes: 20,
            eval_mode: EvalMode::Stochastic,
            eval_seed: 1,
            hyper: Hyperparams::default(),
            reward: RewardConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Validation(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        self.reward.validate()?;
        if self.eval_episodes == 0 {
            return Err(Error::Validation("eval_episodes must be at least 1".into()));
        }
        Ok(())
    }
}
