//! The machine design game.
//!
//! State: five performance flags plus a one-hot of the previous action.
//! Actions: move one design variable one lattice step up or down.
//! Reward: per-flag directional shaping weighted by flag priority, a
//! revisit penalty for lattice points already seen this episode, and a
//! large bonus when every flag is zero. Episodes end on a win or when the
//! step cap is reached.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::{Band, BaseMachine, MachineVariant};
use crate::error::{Error, Result};
use crate::surrogate::{self, DesignPoint, LatticePoint, Performance};

pub const NUM_FLAGS: usize = 5;
pub const NUM_ACTIONS: usize = 6;
pub const OBS_DIM: usize = NUM_FLAGS + NUM_ACTIONS;

/// Ternary flags in priority order (b_gap, t_break, i_start, d_temp,
/// tooth_tip). `+1` means the value is above its band and should decrease,
/// `-1` means it is below and should increase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct FlagVector(pub [i8; NUM_FLAGS]);

impl FlagVector {
    pub fn is_clear(&self) -> bool {
        self.0.iter().all(|&f| f == 0)
    }

    /// Index of the highest-priority nonzero flag.
    pub fn leading(&self) -> Option<usize> {
        self.0.iter().position(|&f| f != 0)
    }
}

pub fn flag(value: f64, band: &Band) -> i8 {
    if value > band.high {
        1
    } else if value < band.low {
        -1
    } else {
        0
    }
}

pub fn flags(perf: &Performance, bands: &[Band; NUM_FLAGS]) -> FlagVector {
    let values = perf.to_array();
    FlagVector(std::array::from_fn(|i| flag(values[i], &bands[i])))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    LengthUp,
    LengthDown,
    TurnsUp,
    TurnsDown,
    ToothTipUp,
    ToothTipDown,
}

impl Action {
    pub const ALL: [Action; NUM_ACTIONS] = [
        Action::LengthUp,
        Action::LengthDown,
        Action::TurnsUp,
        Action::TurnsDown,
        Action::ToothTipUp,
        Action::ToothTipDown,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Result<Action> {
        Action::ALL
            .get(index)
            .copied()
            .ok_or_else(|| Error::ContractViolation(format!("action index {index} not in 0..6")))
    }

    /// The neighbouring lattice point, or `None` when the move would leave
    /// the machine's bounds.
    pub fn apply(self, point: LatticePoint, base: &BaseMachine) -> Option<LatticePoint> {
        let mut next = point;
        match self {
            Action::LengthUp => next.length += 1,
            Action::LengthDown => next.length -= 1,
            Action::TurnsUp => next.turns += 1,
            Action::TurnsDown => next.turns -= 1,
            Action::ToothTipUp => next.tooth_tip += 1,
            Action::ToothTipDown => next.tooth_tip -= 1,
        }
        base.contains(next).then_some(next)
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::LengthUp => "length-up",
            Action::LengthDown => "length-down",
            Action::TurnsUp => "turns-up",
            Action::TurnsDown => "turns-down",
            Action::ToothTipUp => "tooth-tip-up",
            Action::ToothTipDown => "tooth-tip-down",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Action {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Action::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Validation(format!("unknown action `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn encode(flags: &FlagVector, prev_action: Option<Action>) -> Observation {
    let mut obs = [0.0; OBS_DIM];
    for (slot, &f) in obs.iter_mut().zip(&flags.0) {
        *slot = f64::from(f);
    }
    if let Some(a) = prev_action {
        obs[NUM_FLAGS + a.index()] = 1.0;
    }
    Observation(obs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    /// Reward for a flagged value moving the right way.
    pub w_p: f64,
    /// Reward for a flagged value not improving, or an in-band value leaving its band.
    pub w_n: f64,
    /// Penalty for landing on a lattice point already visited this episode.
    pub w_v: f64,
    /// Bonus for reaching all-zero flags.
    pub w_win: f64,
    /// Multipliers in flag order.
    pub priority_weights: [f64; NUM_FLAGS],
    pub max_steps: u32,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            w_p: 1.0,
            w_n: -1.0,
            w_v: -2.0,
            w_win: 100.0,
            priority_weights: [5.0, 4.0, 3.0, 2.0, 1.0],
            max_steps: 300,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Validation(format!("reward: {m}")));
        if !(self.w_p > 0.0 && self.w_n < 0.0) {
            return fail("need w_p > 0 > w_n");
        }
        if !(self.w_v < 0.0) {
            return fail("need w_v < 0");
        }
        if self.priority_weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return fail("priority weights must be positive");
        }
        // The win bonus has to outweigh the largest possible one-step shaping sum.
        let shaping_max: f64 = self.priority_weights.iter().sum::<f64>() * self.w_p;
        if !(self.w_win > shaping_max) {
            return fail(&format!("need w_win > {shaping_max}"));
        }
        if self.max_steps == 0 {
            return fail("max_steps must be at least 1");
        }
        Ok(())
    }
}

/// Unweighted per-flag shaping terms.
pub fn slot_rewards(
    prev: &Performance,
    next: &Performance,
    prev_flags: &FlagVector,
    bands: &[Band; NUM_FLAGS],
    config: &RewardConfig,
) -> [f64; NUM_FLAGS] {
    let before = prev.to_array();
    let after = next.to_array();
    std::array::from_fn(|i| match prev_flags.0[i] {
        1 if after[i] < before[i] => config.w_p,
        -1 if after[i] > before[i] => config.w_p,
        0 if bands[i].contains(after[i]) => 0.0,
        _ => config.w_n,
    })
}

/// Priority-weighted shaping reward of one transition. Revisit penalty and
/// win bonus are added by [`DesignEnv::step`].
pub fn reward_for(
    prev: &Performance,
    next: &Performance,
    prev_flags: &FlagVector,
    bands: &[Band; NUM_FLAGS],
    config: &RewardConfig,
) -> f64 {
    slot_rewards(prev, next, prev_flags, bands, config)
        .iter()
        .zip(&config.priority_weights)
        .map(|(r, w)| r * w)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DoneCause {
    Win,
    Truncation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub action: Action,
    pub prev_point: LatticePoint,
    pub point: LatticePoint,
    pub design: DesignPoint,
    pub prev_performance: Performance,
    pub performance: Performance,
    pub prev_flags: FlagVector,
    pub flags: FlagVector,
    /// The move would have left the bounds, so the design did not change.
    pub clamped: bool,
    pub revisit: bool,
    /// `reward_for` part of the reward.
    pub shaping: f64,
    pub step: u32,
    pub cause: Option<DoneCause>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone)]
struct Episode {
    base: BaseMachine,
    variant: MachineVariant,
    point: LatticePoint,
    performance: Performance,
    flags: FlagVector,
    steps: u32,
    visited: HashSet<LatticePoint>,
    prev_action: Option<Action>,
    done: Option<DoneCause>,
}

/// One design-game instance. Call [`DesignEnv::reset`] before stepping.
#[derive(Debug, Clone)]
pub struct DesignEnv {
    config: RewardConfig,
    episode: Option<Episode>,
}

impl DesignEnv {
    pub fn new(config: RewardConfig) -> Result<Self> {
        config.validate()?;
        Ok(DesignEnv { config, episode: None })
    }

    pub fn config(&self) -> &RewardConfig {
        &self.config
    }

    pub fn reset(&mut self, variant: &MachineVariant) -> Result<Observation> {
        let base = variant.base()?;
        let point = base.locate(&variant.initial_design)?;
        let performance = surrogate::evaluate_point(&base, point);
        let flags = flags(&performance, &variant.target_bands);
        self.episode = Some(Episode {
            base,
            variant: variant.clone(),
            point,
            performance,
            flags,
            steps: 0,
            visited: HashSet::from([point]),
            prev_action: None,
            done: None,
        });
        Ok(encode(&flags, None))
    }

    pub fn step(&mut self, action: Action) -> Result<Step> {
        let config = &self.config;
        let ep = self
            .episode
            .as_mut()
            .ok_or_else(|| Error::ContractViolation("step before reset".into()))?;
        if ep.done.is_some() {
            return Err(Error::ContractViolation("step after episode end".into()));
        }
        let prev_point = ep.point;
        let prev_performance = ep.performance;
        let prev_flags = ep.flags;

        let (point, clamped, shaping, revisit) = if prev_flags.is_clear() {
            // The starting design is already feasible: the first step ends
            // the game without touching the design.
            (prev_point, false, 0.0, false)
        } else {
            let (point, clamped) = match action.apply(prev_point, &ep.base) {
                Some(p) => (p, false),
                None => (prev_point, true),
            };
            let performance = surrogate::evaluate_point(&ep.base, point);
            let shaping = reward_for(
                &prev_performance,
                &performance,
                &prev_flags,
                &ep.variant.target_bands,
                config,
            );
            (point, clamped, shaping, ep.visited.contains(&point))
        };

        let performance = surrogate::evaluate_point(&ep.base, point);
        let new_flags = flags(&performance, &ep.variant.target_bands);
        let win = new_flags.is_clear();
        let mut reward = shaping;
        if revisit {
            reward += config.w_v;
        }
        if win {
            reward += config.w_win;
        }

        ep.visited.insert(point);
        ep.point = point;
        ep.performance = performance;
        ep.flags = new_flags;
        ep.steps += 1;
        ep.prev_action = Some(action);
        let cause = if win {
            Some(DoneCause::Win)
        } else if ep.steps >= config.max_steps {
            Some(DoneCause::Truncation)
        } else {
            None
        };
        ep.done = cause;

        Ok(Step {
            observation: encode(&new_flags, Some(action)),
            reward,
            done: cause.is_some(),
            info: StepInfo {
                action,
                prev_point,
                point,
                design: ep.base.design(point),
                prev_performance,
                performance,
                prev_flags,
                flags: new_flags,
                clamped,
                revisit,
                shaping,
                step: ep.steps,
                cause,
            },
        })
    }

    fn ep(&self) -> &Episode {
        self.episode.as_ref().expect("environment used before reset")
    }

    pub fn is_ready(&self) -> bool {
        self.episode.as_ref().is_some_and(|e| e.done.is_none())
    }

    pub fn done(&self) -> Option<DoneCause> {
        self.episode.as_ref().and_then(|e| e.done)
    }

    pub fn observation(&self) -> Observation {
        let ep = self.ep();
        encode(&ep.flags, ep.prev_action)
    }

    pub fn base(&self) -> &BaseMachine {
        &self.ep().base
    }

    pub fn variant(&self) -> &MachineVariant {
        &self.ep().variant
    }

    pub fn point(&self) -> LatticePoint {
        self.ep().point
    }

    pub fn design(&self) -> DesignPoint {
        let ep = self.ep();
        ep.base.design(ep.point)
    }

    pub fn performance(&self) -> Performance {
        self.ep().performance
    }

    pub fn flags(&self) -> FlagVector {
        self.ep().flags
    }

    pub fn steps(&self) -> u32 {
        self.ep().steps
    }

    pub fn visited_len(&self) -> usize {
        self.ep().visited.len()
    }

    pub fn prev_action(&self) -> Option<Action> {
        self.ep().prev_action
    }
}

/// One line of the per-step episode log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLogRecord {
    pub episode: u64,
    pub variant: String,
    pub step: u32,
    pub length: f64,
    pub turns: u32,
    pub tooth_tip: f64,
    pub b_gap: f64,
    pub t_break: f64,
    pub i_start: f64,
    pub d_temp: f64,
    pub flags: [i8; NUM_FLAGS],
    pub action: String,
    pub reward: f64,
    pub done: Option<DoneCause>,
}

impl EpisodeLogRecord {
    pub fn new(episode: u64, variant: &MachineVariant, step: &Step) -> Self {
        let info = &step.info;
        EpisodeLogRecord {
            episode,
            variant: variant.label(),
            step: info.step,
            length: info.design.length,
            turns: info.design.turns,
            tooth_tip: info.design.tooth_tip,
            b_gap: info.performance.b_gap,
            t_break: info.performance.t_break,
            i_start: info.performance.i_start,
            d_temp: info.performance.d_temp,
            flags: info.flags.0,
            action: info.action.name().to_string(),
            reward: step.reward,
            done: info.cause,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{builtin_catalog, generate_variants, Split};

    fn band() -> Band {
        Band::new(0.9, 1.1)
    }

    #[test]
    fn flag_rule() {
        assert_eq!(flag(1.0, &band()), 0);
        assert_eq!(flag(1.2, &band()), 1);
        assert_eq!(flag(0.8, &band()), -1);
        assert_eq!(flag(1.1, &band()), 0);
        assert_eq!(flag(0.9, &band()), 0);
    }

    #[test]
    fn action_indices_are_bijective() {
        for (i, a) in Action::ALL.into_iter().enumerate() {
            assert_eq!(a.index(), i);
            assert_eq!(Action::from_index(i).unwrap(), a);
            assert_eq!(a.name().parse::<Action>().unwrap(), a);
        }
        assert!(Action::from_index(6).is_err());
    }

    #[test]
    fn encoding_examples() {
        assert_eq!(encode(&FlagVector::default(), None).0, [0.0; OBS_DIM]);
        let obs = encode(&FlagVector([1, -1, 0, 0, 0]), Some(Action::from_index(3).unwrap()));
        assert_eq!(obs.0, [1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn default_reward_config_is_valid() {
        RewardConfig::default().validate().unwrap();
        let bad = RewardConfig {
            w_v: 0.5,
            ..RewardConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = RewardConfig {
            max_steps: 0,
            ..RewardConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    fn perf(values: [f64; 5]) -> Performance {
        Performance {
            b_gap: values[0],
            t_break: values[1],
            i_start: values[2],
            d_temp: values[3],
            tooth_tip: values[4],
        }
    }

    fn unit_bands() -> [Band; 5] {
        [band(), band(), band(), band(), Band::new(1.0, 5.0)]
    }

    #[test]
    fn reward_examples() {
        let cfg = RewardConfig::default();
        let bands = unit_bands();
        // Feasible steady state.
        let p = perf([1.0, 1.0, 1.0, 1.0, 2.0]);
        assert_eq!(reward_for(&p, &p, &FlagVector::default(), &bands, &cfg), 0.0);

        // b_gap too high and decreasing, others stay inside.
        let before = perf([1.2, 1.0, 1.0, 1.0, 2.0]);
        let after = perf([1.15, 1.02, 0.98, 1.0, 2.0]);
        let f = flags(&before, &bands);
        assert_eq!(f.0, [1, 0, 0, 0, 0]);
        assert_eq!(reward_for(&before, &after, &f, &bands, &cfg), 5.0);

        // Torque flagged too high: raising it is penalized, lowering rewarded.
        let before = perf([1.0, 1.2, 1.0, 1.0, 2.0]);
        let f = flags(&before, &bands);
        let up = perf([1.0, 1.3, 1.0, 1.0, 2.0]);
        let down = perf([1.0, 1.15, 1.0, 1.0, 2.0]);
        assert_eq!(reward_for(&before, &up, &f, &bands, &cfg), 4.0 * cfg.w_n);
        assert_eq!(reward_for(&before, &down, &f, &bands, &cfg), 4.0 * cfg.w_p);
        // Torque flagged too low: raising it is rewarded.
        let before = perf([1.0, 0.8, 1.0, 1.0, 2.0]);
        let f = flags(&before, &bands);
        assert_eq!(reward_for(&before, &up, &f, &bands, &cfg), 4.0 * cfg.w_p);

        // An in-band value leaving its band costs w_n.
        let before = perf([1.0, 1.0, 1.0, 1.0, 2.0]);
        let after = perf([1.0, 1.0, 1.0, 1.2, 2.0]);
        assert_eq!(
            reward_for(&before, &after, &FlagVector::default(), &bands, &cfg),
            2.0 * cfg.w_n
        );
    }

    #[test]
    fn unchanged_flagged_value_counts_as_wrong_direction() {
        let cfg = RewardConfig::default();
        let before = perf([1.0, 1.0, 1.0, 1.3, 2.0]);
        let f = flags(&before, &unit_bands());
        assert_eq!(reward_for(&before, &before, &f, &unit_bands(), &cfg), 2.0 * cfg.w_n);
    }

    fn variant_with(start: LatticePoint, bands: [Band; 5]) -> MachineVariant {
        let base = builtin_catalog()[0];
        MachineVariant {
            base_id: base.id,
            index: 0,
            split: Split::Train,
            variant_seed: 0,
            initial_design: base.design(start),
            target_bands: bands,
            feasible_exists: true,
        }
    }

    fn wide_bands(h0: f64) -> [Band; 5] {
        [
            Band::new(0.92, 1.08),
            Band::new(0.85, 1.15),
            Band::new(0.85, 1.15),
            Band::new(0.9, 1.1),
            Band::new(0.6 * h0, 2.2 * h0),
        ]
    }

    #[test]
    fn reset_examples() {
        let base = builtin_catalog()[0];
        let mut env = DesignEnv::new(RewardConfig::default()).unwrap();
        // Torque below its band only.
        let mut bands = wide_bands(base.tooth_tip.anchor);
        bands[1] = Band::new(1.05, 1.2);
        let v = variant_with(LatticePoint::ORIGIN, bands);
        let a = env.reset(&v).unwrap();
        assert_eq!(&a.0[..5], &[0.0, -1.0, 0.0, 0.0, 0.0]);
        assert_eq!(&a.0[5..], &[0.0; 6]);
        let b = env.reset(&v).unwrap();
        assert_eq!(a, b);
        assert_eq!(env.visited_len(), 1);
    }

    #[test]
    fn step_requires_reset_and_not_done() {
        let mut env = DesignEnv::new(RewardConfig {
            max_steps: 1,
            ..RewardConfig::default()
        })
        .unwrap();
        assert!(matches!(env.step(Action::LengthUp), Err(Error::ContractViolation(_))));
        let base = builtin_catalog()[0];
        let mut bands = wide_bands(base.tooth_tip.anchor);
        bands[0] = Band::new(2.0, 3.0);
        env.reset(&variant_with(LatticePoint::ORIGIN, bands)).unwrap();
        let s = env.step(Action::LengthUp).unwrap();
        assert!(s.done);
        assert_eq!(s.info.cause, Some(DoneCause::Truncation));
        assert!(matches!(env.step(Action::LengthUp), Err(Error::ContractViolation(_))));
    }

    #[test]
    fn clamped_move_pays_revisit_and_wrong_direction() {
        let base = builtin_catalog()[0];
        // At the top length bound with b_gap below its band (needs less length).
        let start = LatticePoint::new(base.length.hi, 0, 0);
        let mut bands = wide_bands(base.tooth_tip.anchor);
        bands[0] = Band::new(0.6, 0.62);
        bands[1] = Band::new(0.1, 10.0);
        bands[2] = Band::new(0.1, 10.0);
        bands[3] = Band::new(0.1, 10.0);
        let mut env = DesignEnv::new(RewardConfig::default()).unwrap();
        let obs = env.reset(&variant_with(start, bands)).unwrap();
        assert_eq!(&obs.0[..5], &[-1.0, 0.0, 0.0, 0.0, 0.0]);
        let s = env.step(Action::LengthUp).unwrap();
        assert!(s.info.clamped && s.info.revisit);
        assert_eq!(s.info.point, start);
        assert_eq!(s.reward, -5.0 - 2.0);
        assert_eq!(env.visited_len(), 1);
    }

    #[test]
    fn win_adds_bonus_and_ends() {
        let base = builtin_catalog()[0];
        // Base design plus one length step is feasible; base itself is not.
        let one_up = surrogate::evaluate_point(&base, LatticePoint::new(1, 0, 0));
        let mut bands = wide_bands(base.tooth_tip.anchor);
        bands[1] = Band::new(one_up.t_break - 1e-9, 1.2);
        let v = variant_with(LatticePoint::ORIGIN, bands);
        let mut env = DesignEnv::new(RewardConfig::default()).unwrap();
        env.reset(&v).unwrap();
        assert_eq!(env.flags().0, [0, -1, 0, 0, 0]);
        let s = env.step(Action::LengthUp).unwrap();
        assert!(s.done);
        assert_eq!(s.info.cause, Some(DoneCause::Win));
        assert_eq!(s.reward, s.info.shaping + 100.0);
        assert_eq!(s.info.shaping, 4.0);
    }

    #[test]
    fn feasible_start_wins_on_first_step() {
        let base = builtin_catalog()[0];
        let v = variant_with(LatticePoint::ORIGIN, wide_bands(base.tooth_tip.anchor));
        let mut env = DesignEnv::new(RewardConfig::default()).unwrap();
        env.reset(&v).unwrap();
        assert!(env.flags().is_clear());
        let s = env.step(Action::ToothTipDown).unwrap();
        assert!(s.done);
        assert_eq!(s.info.cause, Some(DoneCause::Win));
        assert_eq!(s.info.point, LatticePoint::ORIGIN);
        assert_eq!(s.reward, 100.0);
    }

    #[test]
    fn log_record_serializes() {
        let base = builtin_catalog()[0];
        let v = generate_variants(&base, 1, 1).unwrap().remove(0);
        let mut env = DesignEnv::new(RewardConfig::default()).unwrap();
        env.reset(&v).unwrap();
        let s = env.step(Action::TurnsUp).unwrap();
        let rec = EpisodeLogRecord::new(0, &v, &s);
        let line = serde_json::to_string(&rec).unwrap();
        let back: EpisodeLogRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back, rec);
    }
}
