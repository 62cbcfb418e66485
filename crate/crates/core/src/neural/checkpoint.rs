//! Text checkpoint of the actor, the critic and their optimizer state.
//!
//! ```text
//! motor-design-ckpt v1
//! [meta]
//! updates = 12
//! env_steps = 98304
//! [actor]
//! sizes = 11 64 64 6
//! layer0_weights = ...      # row-major, outputs x inputs
//! layer0_bias = ...
//! [actor_adam]
//! step = 48
//! ...
//! ```
//!
//! Floats are written in shortest round-trip form, so a load returns the
//! identical bits.

use std::path::Path;

use crate::error::{Error, Result};
use crate::textfmt::{self, Section, Writer};

use super::{AdamState, Grads, Layer, Mlp};

pub const CHECKPOINT_HEADER: &str = "motor-design-ckpt v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_adam: AdamState,
    pub critic_adam: AdamState,
    /// PPO updates performed so far.
    pub updates: u64,
    /// Environment steps consumed so far.
    pub env_steps: u64,
}

fn write_layers(w: &mut Writer, prefix: &str, layers: &[Layer]) {
    for (k, l) in layers.iter().enumerate() {
        w.floats(&format!("{prefix}layer{k}_weights"), &l.weights);
        w.floats(&format!("{prefix}layer{k}_bias"), &l.bias);
    }
}

fn write_net(w: &mut Writer, name: &str, net: &Mlp) {
    w.section(name);
    let sizes: Vec<String> = net.sizes().iter().map(ToString::to_string).collect();
    w.kv("sizes", sizes.join(" "));
    write_layers(w, "", &net.layers);
}

fn write_adam(w: &mut Writer, name: &str, s: &AdamState) {
    w.section(name);
    w.kv("step", s.step);
    w.floats("learning_rate", &[s.learning_rate]);
    w.floats("beta1", &[s.beta1]);
    w.floats("beta2", &[s.beta2]);
    w.floats("epsilon", &[s.epsilon]);
    write_layers(w, "m_", &s.first_moment.layers);
    write_layers(w, "v_", &s.second_moment.layers);
}

fn read_layers(s: &Section, prefix: &str, shape: &Mlp) -> Result<Vec<Layer>> {
    shape
        .layers
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let wkey = format!("{prefix}layer{k}_weights");
            let bkey = format!("{prefix}layer{k}_bias");
            let weights: Vec<f64> = s.list(&wkey)?;
            let bias: Vec<f64> = s.list(&bkey)?;
            if weights.len() != l.inputs * l.outputs {
                return Err(s.error(
                    &wkey,
                    format!(
                        "`{wkey}` has {} values, expected {}",
                        weights.len(),
                        l.inputs * l.outputs
                    ),
                ));
            }
            if bias.len() != l.outputs {
                return Err(s.error(
                    &bkey,
                    format!("`{bkey}` has {} values, expected {}", bias.len(), l.outputs),
                ));
            }
            Ok(Layer {
                inputs: l.inputs,
                outputs: l.outputs,
                weights,
                bias,
            })
        })
        .collect()
}

fn read_net(s: &Section) -> Result<Mlp> {
    let sizes: Vec<usize> = s.list("sizes")?;
    let shape = Mlp::zeros(&sizes).map_err(|e| s.error("sizes", e.to_string()))?;
    Ok(Mlp {
        layers: read_layers(s, "", &shape)?,
    })
}

fn read_adam(s: &Section, net: &Mlp) -> Result<AdamState> {
    Ok(AdamState {
        first_moment: Grads {
            layers: read_layers(s, "m_", net)?,
        },
        second_moment: Grads {
            layers: read_layers(s, "v_", net)?,
        },
        step: s.get("step")?,
        learning_rate: s.get("learning_rate")?,
        beta1: s.get("beta1")?,
        beta2: s.get("beta2")?,
        epsilon: s.get("epsilon")?,
    })
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let mut w = Writer::new(CHECKPOINT_HEADER);
        w.section("meta");
        w.kv("updates", self.updates);
        w.kv("env_steps", self.env_steps);
        write_net(&mut w, "actor", &self.actor);
        write_adam(&mut w, "actor_adam", &self.actor_adam);
        write_net(&mut w, "critic", &self.critic);
        write_adam(&mut w, "critic_adam", &self.critic_adam);
        w.finish()
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let sections = textfmt::parse(path, text, CHECKPOINT_HEADER)?;
        let find = |name: &str| {
            sections
                .iter()
                .find(|s| s.name == name)
                .ok_or_else(|| Error::malformed(path, 1, format!("missing section [{name}]")))
        };
        let meta = find("meta")?;
        let actor = read_net(find("actor")?)?;
        let critic = read_net(find("critic")?)?;
        Ok(Checkpoint {
            actor_adam: read_adam(find("actor_adam")?, &actor)?,
            critic_adam: read_adam(find("critic_adam")?, &critic)?,
            actor,
            critic,
            updates: meta.get("updates")?,
            env_steps: meta.get("env_steps")?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(path, &text)
    }
}
