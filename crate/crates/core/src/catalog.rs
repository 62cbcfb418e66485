//! Base machines, their design lattices, and seeded training variants.
//!
//! A variant is a base machine together with a starting design and five
//! target bands. Every emitted variant is certified: an exhaustive scan of
//! the machine's lattice finds at least one design inside all bands.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::surrogate::{self, DesignPoint, LatticePoint, PerUnit, Performance};
use crate::textfmt;

pub const CATALOG_HEADER: &str = "motor-design-catalog v1";

/// Names of the five performance values, in flag priority order.
pub const PERFORMANCE_KEYS: [&str; 5] = ["b_gap", "t_break", "i_start", "d_temp", "tooth_tip"];

/// Training variants per base machine (3 x 25 = 75).
pub const TRAIN_PER_MACHINE: usize = 25;
/// Held-out evaluation variants per base machine.
pub const HELD_OUT_PER_MACHINE: usize = 5;
/// Consecutive rejected draws before generation gives up.
pub const MAX_DRAWS: usize = 1000;

/// One design variable's lattice. Offset `m` maps to the per-unit value
/// `(divisions + m) / divisions`, so `m = 0` is the base design and one
/// step is `anchor / divisions` in physical units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    /// Physical value at the base design.
    pub anchor: f64,
    /// Lattice steps per unit of the per-unit value.
    pub divisions: u32,
    /// Lowest allowed offset (inclusive).
    pub lo: i32,
    /// Highest allowed offset (inclusive).
    pub hi: i32,
}

impl Axis {
    pub fn per_unit(&self, offset: i32) -> f64 {
        let d = self.divisions as i32;
        f64::from(d + offset) / f64::from(d)
    }

    pub fn value(&self, offset: i32) -> f64 {
        self.anchor * self.per_unit(offset)
    }

    pub fn step_size(&self) -> f64 {
        self.anchor / f64::from(self.divisions)
    }

    pub fn contains(&self, offset: i32) -> bool {
        (self.lo..=self.hi).contains(&offset)
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }

    /// Lattice offset of a physical value, if it sits on the lattice.
    fn offset_of(&self, value: f64) -> Option<i32> {
        let raw = (value / self.anchor - 1.0) * f64::from(self.divisions);
        if !raw.is_finite() {
            return None;
        }
        let offset = raw.round() as i32;
        let snapped = self.value(offset);
        ((snapped - value).abs() <= 1e-9 * self.anchor.abs().max(1.0)).then_some(offset)
    }
}

/// SI reference values that convert per-unit results into reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiAnchors {
    /// Airgap flux density in tesla.
    pub b_gap: f64,
    /// Torque in newton-meters.
    pub torque: f64,
    /// Current in amperes.
    pub current: f64,
    /// Temperature rise in kelvin.
    pub temp_rise: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseMachine {
    pub id: u8,
    pub rated_power_kw: f64,
    pub line_voltage_v: f64,
    pub frequency_hz: f64,
    pub pole_pairs: u32,
    pub base_design: DesignPoint,
    pub si_anchors: SiAnchors,
    pub length: Axis,
    pub turns: Axis,
    pub tooth_tip: Axis,
}

impl BaseMachine {
    /// A 4-pole, 50 Hz machine on the standard lattice around `(l0, n0, h0)`.
    fn standard(id: u8, rated_power_kw: f64, line_voltage_v: f64, l0: f64, n0: u32, h0: f64) -> Self {
        let frequency_hz = 50.0;
        let pole_pairs = 2;
        let sync_speed = 2.0 * std::f64::consts::PI * frequency_hz / f64::from(pole_pairs);
        let rated_current = rated_power_kw * 1e3 / (3f64.sqrt() * line_voltage_v);
        BaseMachine {
            id,
            rated_power_kw,
            line_voltage_v,
            frequency_hz,
            pole_pairs,
            base_design: DesignPoint {
                length: l0,
                turns: n0,
                tooth_tip: h0,
            },
            si_anchors: SiAnchors {
                b_gap: 0.85,
                torque: rated_power_kw * 1e3 / sync_speed,
                current: 5.0 * rated_current,
                temp_rise: 80.0,
            },
            // [0.5, 2.0] L0 in 0.05 L0 steps
            length: Axis {
                anchor: l0,
                divisions: 20,
                lo: -10,
                hi: 20,
            },
            // N0 +- 10 turns
            turns: Axis {
                anchor: f64::from(n0),
                divisions: n0,
                lo: -10,
                hi: 10,
            },
            // [0.5, 2.5] h0 in 0.1 h0 steps
            tooth_tip: Axis {
                anchor: h0,
                divisions: 10,
                lo: -5,
                hi: 15,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Validation(format!("machine {}: {m}", self.id)));
        if !(self.rated_power_kw > 0.0 && self.line_voltage_v > 0.0) {
            return fail("rated power and voltage must be positive");
        }
        for (name, axis) in [
            ("length", self.length),
            ("turns", self.turns),
            ("tooth_tip", self.tooth_tip),
        ] {
            if !(axis.anchor > 0.0 && axis.divisions > 0 && axis.lo <= 0 && axis.hi >= 0) {
                return fail(&format!("{name} bounds must contain the base design"));
            }
            if axis.per_unit(axis.lo) <= 0.0 {
                return fail(&format!("{name} lower bound must stay positive"));
            }
        }
        if self.base_design.turns != self.turns.anchor as u32 {
            return fail("turns anchor must equal base turns");
        }
        Ok(())
    }

    pub fn contains(&self, p: LatticePoint) -> bool {
        self.length.contains(p.length) && self.turns.contains(p.turns) && self.tooth_tip.contains(p.tooth_tip)
    }

    pub fn per_unit(&self, p: LatticePoint) -> PerUnit {
        PerUnit {
            lambda: self.length.per_unit(p.length),
            nu: self.turns.per_unit(p.turns),
            eta: self.tooth_tip.per_unit(p.tooth_tip),
        }
    }

    pub fn design(&self, p: LatticePoint) -> DesignPoint {
        DesignPoint {
            length: self.length.value(p.length),
            turns: (self.base_design.turns as i32 + p.turns) as u32,
            tooth_tip: self.tooth_tip.value(p.tooth_tip),
        }
    }

    /// Lattice point of a physical design; fails when the design is off
    /// the lattice or outside the bounds.
    pub fn locate(&self, design: &DesignPoint) -> Result<LatticePoint> {
        let (Some(length), Some(tooth_tip)) = (
            self.length.offset_of(design.length),
            self.tooth_tip.offset_of(design.tooth_tip),
        ) else {
            return Err(surrogate::out_of_bounds(design, self, "is not on the design lattice"));
        };
        let point = LatticePoint {
            length,
            turns: design.turns as i32 - self.base_design.turns as i32,
            tooth_tip,
        };
        if !self.contains(point) {
            return Err(surrogate::out_of_bounds(design, self, "is outside the design bounds"));
        }
        Ok(point)
    }

    /// Inclusive (min, max) designs.
    pub fn bounds(&self) -> (DesignPoint, DesignPoint) {
        let lo = LatticePoint::new(self.length.lo, self.turns.lo, self.tooth_tip.lo);
        let hi = LatticePoint::new(self.length.hi, self.turns.hi, self.tooth_tip.hi);
        (self.design(lo), self.design(hi))
    }

    /// (length step in m, turns step, tooth-tip step in mm).
    pub fn step_sizes(&self) -> (f64, u32, f64) {
        (self.length.step_size(), 1, self.tooth_tip.step_size())
    }

    pub fn lattice_size(&self) -> usize {
        self.length.len() * self.turns.len() * self.tooth_tip.len()
    }

    pub fn lattice_points(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        (self.length.lo..=self.length.hi).flat_map(move |l| {
            (self.turns.lo..=self.turns.hi)
                .flat_map(move |n| (self.tooth_tip.lo..=self.tooth_tip.hi).map(move |h| LatticePoint::new(l, n, h)))
        })
    }

    /// Per-unit performance scaled to SI: (B in T, T in N m, I in A, dT in K).
    pub fn to_si(&self, perf: &Performance) -> [f64; 4] {
        let a = self.si_anchors;
        [
            perf.b_gap * a.b_gap,
            perf.t_break * a.torque,
            perf.i_start * a.current,
            perf.d_temp * a.temp_rise,
        ]
    }
}

/// The three case-study machines.
pub fn builtin_catalog() -> [BaseMachine; 3] {
    [
        BaseMachine::standard(1, 2500.0, 10000.0, 1.2, 20, 2.0),
        BaseMachine::standard(2, 600.0, 6000.0, 0.6, 28, 1.5),
        BaseMachine::standard(3, 2100.0, 6000.0, 1.0, 18, 2.0),
    ]
}

pub fn machine(id: u8) -> Result<BaseMachine> {
    builtin_catalog()
        .into_iter()
        .find(|m| m.id == id)
        .ok_or_else(|| Error::Validation(format!("unknown machine id {id}")))
}

/// Inclusive target band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub low: f64,
    pub high: f64,
}

impl Band {
    pub fn new(low: f64, high: f64) -> Self {
        Band { low, high }
    }

    pub fn centered(center: f64, half_width: f64) -> Self {
        Band {
            low: center - half_width,
            high: center + half_width,
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        self.low <= value && value <= self.high
    }

    /// Distance from `value` to the band, zero inside.
    pub fn violation(&self, value: f64) -> f64 {
        (self.low - value).max(value - self.high).max(0.0)
    }
}

/// Whether a variant is used for training or held out for evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    Train,
    HeldOut,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::HeldOut => "held-out",
        })
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "held-out" => Ok(Split::HeldOut),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MachineVariant {
    pub base_id: u8,
    pub index: u32,
    pub split: Split,
    pub variant_seed: u64,
    pub initial_design: DesignPoint,
    /// Bands in [`PERFORMANCE_KEYS`] order; the tooth-tip band is in mm.
    pub target_bands: [Band; 5],
    pub feasible_exists: bool,
}

impl MachineVariant {
    pub fn base(&self) -> Result<BaseMachine> {
        machine(self.base_id)
    }

    pub fn initial_point(&self) -> Result<LatticePoint> {
        self.base()?.locate(&self.initial_design)
    }

    pub fn is_feasible(&self, perf: &Performance) -> bool {
        self.target_bands
            .iter()
            .zip(perf.to_array())
            .all(|(band, v)| band.contains(v))
    }

    pub fn label(&self) -> String {
        format!("m{}-{}", self.base_id, self.index)
    }
}

/// Seed of variant `index` of machine `base_id` under catalog seed `seed`.
pub fn variant_seed(seed: u64, base_id: u8, index: u32) -> u64 {
    seed.wrapping_mul(1_000_000)
        .wrapping_add(u64::from(base_id) * 10_000)
        .wrapping_add(u64::from(index))
}

/// Band center offsets and half-widths for (b_gap, t_break, i_start, d_temp).
const CENTER_SPREAD: [f64; 4] = [0.03, 0.05, 0.05, 0.03];
const HALF_WIDTH: [f64; 4] = [0.08, 0.15, 0.15, 0.10];
/// Initial-design offsets: lambda in 0.80..=1.30, turns in -5..=5, eta in 0.7..=1.6.
const INITIAL_LENGTH: (i32, i32) = (-4, 6);
const INITIAL_TURNS: (i32, i32) = (-5, 5);
const INITIAL_TOOTH_TIP: (i32, i32) = (-3, 6);
/// Tooth-tip band as multiples of h0.
const TOOTH_TIP_BAND: (f64, f64) = (0.6, 2.2);

/// `count` certified variants of `base`, deterministic in `(base, count, seed)`.
pub fn generate_variants(base: &BaseMachine, count: usize, seed: u64) -> Result<Vec<MachineVariant>> {
    if count == 0 {
        return Err(Error::Validation("variant count must be at least 1".into()));
    }
    base.validate()?;
    (0..count as u32)
        .map(|index| generate_one(base, index, variant_seed(seed, base.id, index)))
        .collect()
}

fn generate_one(base: &BaseMachine, index: u32, variant_seed: u64) -> Result<MachineVariant> {
    let mut rng = ChaCha8Rng::seed_from_u64(variant_seed);
    for _ in 0..MAX_DRAWS {
        let start = LatticePoint::new(
            rng.gen_range(INITIAL_LENGTH.0..=INITIAL_LENGTH.1),
            rng.gen_range(INITIAL_TURNS.0..=INITIAL_TURNS.1),
            rng.gen_range(INITIAL_TOOTH_TIP.0..=INITIAL_TOOTH_TIP.1),
        );
        let mut bands = [Band::new(0.0, 0.0); 5];
        for i in 0..4 {
            let center = 1.0 + rng.gen_range(-CENTER_SPREAD[i]..=CENTER_SPREAD[i]);
            bands[i] = Band::centered(center, HALF_WIDTH[i]);
        }
        let h0 = base.tooth_tip.anchor;
        bands[4] = Band::new(TOOTH_TIP_BAND.0 * h0, TOOTH_TIP_BAND.1 * h0);

        let mut variant = MachineVariant {
            base_id: base.id,
            index,
            split: Split::Train,
            variant_seed,
            initial_design: base.design(start),
            target_bands: bands,
            feasible_exists: false,
        };
        if feasible_points(base, &variant).next().is_some() {
            variant.feasible_exists = true;
            return Ok(variant);
        }
    }
    Err(Error::GenerationExhausted {
        base_id: base.id,
        attempts: MAX_DRAWS,
    })
}

/// Every lattice point of `base` whose performance lies inside all bands.
pub fn feasible_points<'a>(
    base: &'a BaseMachine,
    variant: &'a MachineVariant,
) -> impl Iterator<Item = LatticePoint> + 'a {
    base.lattice_points()
        .filter(move |&p| variant.is_feasible(&surrogate::evaluate_point(base, p)))
}

/// The full experiment catalog: for each requested machine, the first
/// [`TRAIN_PER_MACHINE`] variants are training variants and the next
/// [`HELD_OUT_PER_MACHINE`] are held out.
pub fn standard_catalog(seed: u64, machine_ids: &[u8]) -> Result<Vec<MachineVariant>> {
    let mut out = Vec::new();
    for &id in machine_ids {
        let base = machine(id)?;
        let mut variants = generate_variants(&base, TRAIN_PER_MACHINE + HELD_OUT_PER_MACHINE, seed)?;
        for v in variants.iter_mut().skip(TRAIN_PER_MACHINE) {
            v.split = Split::HeldOut;
        }
        out.extend(variants);
    }
    Ok(out)
}

pub fn select(variants: &[MachineVariant], split: Split) -> Vec<MachineVariant> {
    variants.iter().filter(|v| v.split == split).cloned().collect()
}

const VARIANT_KEYS: [&str; 13] = [
    "base_id",
    "index",
    "split",
    "variant_seed",
    "initial_length",
    "initial_turns",
    "initial_tooth_tip",
    "band_b_gap",
    "band_t_break",
    "band_i_start",
    "band_d_temp",
    "band_tooth_tip",
    "feasible_exists",
];

pub fn catalog_to_string(variants: &[MachineVariant]) -> String {
    let mut w = textfmt::Writer::new(CATALOG_HEADER);
    w.comment("bands: b_gap, t_break, i_start, d_temp per unit; tooth_tip in mm");
    w.comment("initial design: length in m, turns, tooth_tip in mm");
    for v in variants {
        w.section("variant");
        w.kv("base_id", v.base_id);
        w.kv("index", v.index);
        w.kv("split", v.split);
        w.kv("variant_seed", v.variant_seed);
        w.floats("initial_length", &[v.initial_design.length]);
        w.kv("initial_turns", v.initial_design.turns);
        w.floats("initial_tooth_tip", &[v.initial_design.tooth_tip]);
        for (key, band) in PERFORMANCE_KEYS.iter().zip(&v.target_bands) {
            w.floats(&format!("band_{key}"), &[band.low, band.high]);
        }
        w.kv("feasible_exists", v.feasible_exists);
    }
    w.finish()
}

pub fn save_catalog(variants: &[MachineVariant], path: &Path) -> Result<()> {
    std::fs::write(path, catalog_to_string(variants)).map_err(|e| Error::io(path, e))
}

pub fn load_catalog(path: &Path) -> Result<Vec<MachineVariant>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_catalog(path, &text)
}

pub fn parse_catalog(path: &Path, text: &str) -> Result<Vec<MachineVariant>> {
    let sections = textfmt::parse(path, text, CATALOG_HEADER)?;
    if sections.is_empty() {
        return Err(Error::malformed(path, 1, "catalog contains no variants"));
    }
    sections.iter().map(parse_variant).collect()
}

fn parse_variant(s: &textfmt::Section) -> Result<MachineVariant> {
    if s.name != "variant" {
        return Err(s.error("", format!("unexpected section [{}]", s.name)));
    }
    textfmt::check_keys(s, &VARIANT_KEYS)?;
    let base_id: u8 = s.get("base_id")?;
    let base = machine(base_id).map_err(|_| s.error("base_id", format!("unknown machine id {base_id}")))?;
    let initial_design = DesignPoint {
        length: s.get("initial_length")?,
        turns: s.get("initial_turns")?,
        tooth_tip: s.get("initial_tooth_tip")?,
    };
    base.locate(&initial_design)
        .map_err(|e| s.error("initial_length", e.to_string()))?;
    let mut target_bands = [Band::new(0.0, 0.0); 5];
    for (slot, key) in PERFORMANCE_KEYS.iter().enumerate() {
        let key = format!("band_{key}");
        let pair: Vec<f64> = s.list(&key)?;
        let [low, high] = pair[..] else {
            return Err(s.error(&key, format!("`{key}` needs exactly two values")));
        };
        if !(low <= high) {
            return Err(s.error(&key, format!("`{key}` has low > high")));
        }
        target_bands[slot] = Band::new(low, high);
    }
    Ok(MachineVariant {
        base_id,
        index: s.get("index")?,
        split: s.get("split")?,
        variant_seed: s.get("variant_seed")?,
        initial_design,
        target_bands,
        feasible_exists: s.get("feasible_exists")?,
    })
}
