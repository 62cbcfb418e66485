//! Learning to dimension induction machines.
//!
//! A base machine is adjusted in three design variables (stack length,
//! coil turns, rotor tooth-tip height) on a discrete lattice until five
//! performance flags are all zero. The crate contains:
//!
//! * [`catalog`]: the three base machines and the seeded variant generator,
//! * [`surrogate`]: a closed-form per-unit performance model,
//! * [`env`]: the design game (flags, observation encoding, shaped reward),
//! * [`neural`]: a small dense network kernel with exact backprop and Adam,
//! * [`ppo`]: rollout collection, GAE, clipped-surrogate updates, training
//!   and evaluation,
//! * [`agents`]: random and greedy baselines plus a BFS shortest-path oracle,
//! * [`cli`]: the `motor-design` command line.

// `!(a < b)` checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod catalog;
pub mod cli;
pub mod config;
pub mod env;
pub mod error;
pub mod neural;
pub mod ppo;
pub mod surrogate;
mod textfmt;

pub use error::{Error, Result};
