//! Closed-form per-unit performance model of an induction machine.
//!
//! The three design variables are normalized against the base machine,
//! `lambda = L/L0`, `nu = N/N0`, `eta = h/h0`, and mapped to
//!
//! ```text
//! sigma   = 1 + 0.4 (eta - 1)                 tooth-tip leakage factor
//! b_gap   = 1 / (nu lambda)                   flux per pole over pole area
//! t_break = lambda / (nu^2 sigma)
//! i_start = 1 / (nu^2 lambda sigma)
//! d_temp  = 0.7 nu^2 + 0.3 / (nu^2 lambda^2)  copper + iron loss heating
//! ```
//!
//! Every value is 1 at the base design. The model only has to reproduce the
//! directional couplings a designer relies on; it is not a field solver.

use serde::{Deserialize, Serialize};

use crate::catalog::BaseMachine;
use crate::error::{Error, Result};

/// Tooth-tip leakage gain.
pub const TOOTH_TIP_LEAKAGE_GAIN: f64 = 0.4;
/// Share of the temperature rise caused by copper loss at the base design.
pub const COPPER_SHARE: f64 = 0.7;
/// Share of the temperature rise caused by iron loss at the base design.
pub const IRON_SHARE: f64 = 0.3;

/// A machine design in physical units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    /// Stack length in meters.
    pub length: f64,
    /// Series turns per coil.
    pub turns: u32,
    /// Rotor tooth-tip height in millimeters.
    pub tooth_tip: f64,
}

/// Integer lattice offsets of a design from the base design, one per
/// design variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct LatticePoint {
    pub length: i32,
    pub turns: i32,
    pub tooth_tip: i32,
}

impl LatticePoint {
    pub const ORIGIN: LatticePoint = LatticePoint {
        length: 0,
        turns: 0,
        tooth_tip: 0,
    };

    pub fn new(length: i32, turns: i32, tooth_tip: i32) -> Self {
        LatticePoint {
            length,
            turns,
            tooth_tip,
        }
    }
}

/// Per-unit design variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerUnit {
    pub lambda: f64,
    pub nu: f64,
    pub eta: f64,
}

/// The five checked performance values, in flag priority order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Performance {
    /// Airgap flux density, per unit.
    pub b_gap: f64,
    /// Breakdown torque, per unit.
    pub t_break: f64,
    /// Starting current, per unit.
    pub i_start: f64,
    /// Stator temperature rise, per unit.
    pub d_temp: f64,
    /// Rotor tooth-tip height in millimeters (the design variable itself).
    pub tooth_tip: f64,
}

impl Performance {
    pub fn to_array(&self) -> [f64; 5] {
        [self.b_gap, self.t_break, self.i_start, self.d_temp, self.tooth_tip]
    }
}

/// Ratio of each design variable to the base design.
pub fn normalize(design: &DesignPoint, base: &BaseMachine) -> Result<PerUnit> {
    let point = base.locate(design)?;
    Ok(base.per_unit(point))
}

/// Performance of a physical design point.
pub fn evaluate(design: &DesignPoint, base: &BaseMachine) -> Result<Performance> {
    let point = base.locate(design)?;
    Ok(evaluate_point(base, point))
}

/// Performance of a lattice point. Panics in debug builds when the point
/// lies outside the machine's bounds.
pub fn evaluate_point(base: &BaseMachine, point: LatticePoint) -> Performance {
    debug_assert!(base.contains(point), "lattice point {point:?} out of bounds");
    let pu = base.per_unit(point);
    evaluate_per_unit(pu, base.tooth_tip.value(point.tooth_tip))
}

/// The model on already-normalized inputs.
pub fn evaluate_per_unit(pu: PerUnit, tooth_tip_mm: f64) -> Performance {
    let PerUnit { lambda, nu, eta } = pu;
    let sigma = leakage_factor(eta);
    let nu2 = nu * nu;
    Performance {
        b_gap: 1.0 / (nu * lambda),
        t_break: lambda / (nu2 * sigma),
        i_start: 1.0 / (nu2 * lambda * sigma),
        d_temp: COPPER_SHARE * nu2 + IRON_SHARE / (nu2 * lambda * lambda),
        tooth_tip: tooth_tip_mm,
    }
}

pub fn leakage_factor(eta: f64) -> f64 {
    1.0 + TOOTH_TIP_LEAKAGE_GAIN * (eta - 1.0)
}

pub(crate) fn out_of_bounds(design: &DesignPoint, base: &BaseMachine, what: &str) -> Error {
    Error::ContractViolation(format!(
        "design (L = {} m, N = {}, h = {} mm) {what} for machine {}",
        design.length, design.turns, design.tooth_tip, base.id
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::builtin_catalog;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn base_design_normalizes_to_unity() {
        for m in builtin_catalog() {
            let pu = normalize(&m.base_design, &m).unwrap();
            assert_eq!((pu.lambda, pu.nu, pu.eta), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn normalize_ratios() {
        let m = builtin_catalog()[0];
        let d = DesignPoint {
            length: 2.0 * m.base_design.length,
            ..m.base_design
        };
        let pu = normalize(&d, &m).unwrap();
        assert_eq!((pu.lambda, pu.nu, pu.eta), (2.0, 1.0, 1.0));

        let d = DesignPoint {
            turns: m.base_design.turns + 10,
            ..m.base_design
        };
        assert_eq!(m.base_design.turns, 20);
        assert_eq!(normalize(&d, &m).unwrap().nu, 1.5);
    }

    #[test]
    fn out_of_bounds_is_a_contract_violation() {
        let m = builtin_catalog()[0];
        let too_long = DesignPoint {
            length: 2.05 * m.base_design.length,
            ..m.base_design
        };
        assert!(matches!(evaluate(&too_long, &m), Err(Error::ContractViolation(_))));
        let off_lattice = DesignPoint {
            length: 1.01 * m.base_design.length,
            ..m.base_design
        };
        assert!(matches!(normalize(&off_lattice, &m), Err(Error::ContractViolation(_))));
    }

    #[test]
    fn unit_design_is_all_ones() {
        for m in builtin_catalog() {
            let p = evaluate(&m.base_design, &m).unwrap();
            assert_eq!(p.to_array(), [1.0, 1.0, 1.0, 1.0, m.base_design.tooth_tip]);
        }
    }

    // Expected values computed with a separate script before the build.
    #[test]
    fn doubled_length() {
        let p = evaluate_per_unit(
            PerUnit {
                lambda: 2.0,
                nu: 1.0,
                eta: 1.0,
            },
            2.0,
        );
        assert!(close(p.b_gap, 0.5));
        assert!(close(p.t_break, 2.0));
        assert!(close(p.i_start, 0.5));
        assert!(close(p.d_temp, 0.775));
    }

    #[test]
    fn doubled_tooth_tip() {
        assert!(close(leakage_factor(2.0), 1.4));
        let p = evaluate_per_unit(
            PerUnit {
                lambda: 1.0,
                nu: 1.0,
                eta: 2.0,
            },
            4.0,
        );
        assert!(close(p.b_gap, 1.0));
        assert!(close(p.t_break, 0.7142857142857143));
        assert!(close(p.i_start, 0.7142857142857143));
        assert!(close(p.d_temp, 1.0));
        assert_eq!(p.tooth_tip, 4.0);
    }

    #[test]
    fn evaluation_is_bit_identical() {
        let m = builtin_catalog()[1];
        let pt = LatticePoint::new(3, -4, 7);
        let a = evaluate_point(&m, pt).to_array().map(f64::to_bits);
        let b = evaluate_point(&m, pt).to_array().map(f64::to_bits);
        assert_eq!(a, b);
    }
}
