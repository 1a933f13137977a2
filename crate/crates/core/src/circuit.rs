//! Series circuit `V_DD -> R_s -> switch`.
//!
//! The operating point is the intersection of the load line
//! `I = V_DD/R_s - V_sw/R_s` with the active linear branch of the switch,
//! which has the closed form of a resistive divider.

use serde::{Deserialize, Serialize};

use crate::device::{Phase, SwitchParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    HighR,
    LowR,
}

impl From<Phase> for Branch {
    fn from(phase: Phase) -> Self {
        match phase {
            Phase::Insulating => Branch::HighR,
            Phase::Metallic => Branch::LowR,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub v_sw: f64,
    pub i_sw: f64,
    pub branch: Branch,
    /// Whether the point lies inside its branch's validity interval.
    pub stable: bool,
}

impl OperatingPoint {
    pub fn joule_power(&self) -> f64 {
        self.v_sw * self.i_sw
    }
}

fn check_load(r_s: f64) -> Result<()> {
    if r_s > 0.0 && r_s.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "load resistance must be positive and finite, got {r_s} Ohm"
        )))
    }
}

pub fn load_line(v_dd: f64, r_s: f64, v_sw: f64) -> Result<f64> {
    check_load(r_s)?;
    Ok(v_dd / r_s - v_sw / r_s)
}

/// Operating point on the branch selected by `phase`, classified at `ambient_eff`.
pub fn solve_operating_point(
    v_dd: f64,
    r_s: f64,
    phase: Phase,
    params: &SwitchParams,
    ambient_eff: f64,
) -> Result<OperatingPoint> {
    check_load(r_s)?;
    if !(v_dd >= 0.0 && v_dd.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "supply voltage must be finite and non-negative, got {v_dd} V"
        )));
    }
    let mut op = divider(v_dd, r_s, phase, params);
    op.stable = classify_stability(&op, params, ambient_eff)?;
    Ok(op)
}

/// Unchecked divider solution; `stable` is left `false` for the caller to fill.
pub(crate) fn divider(v_dd: f64, r_s: f64, phase: Phase, params: &SwitchParams) -> OperatingPoint {
    let r_branch = params.branch_resistance(phase);
    let i_sw = v_dd / (r_s + r_branch);
    // Solving for v_sw from the loop equation keeps the residual at rounding level.
    let v_sw = v_dd - i_sw * r_s;
    OperatingPoint {
        v_sw,
        i_sw,
        branch: phase.into(),
        stable: false,
    }
}

/// True when the point sits on the positive-resistance part of its branch:
/// below `V_th` for the insulating branch, above `V_h` for the metallic one.
pub fn classify_stability(op: &OperatingPoint, params: &SwitchParams, ambient_eff: f64) -> Result<bool> {
    Ok(match op.branch {
        Branch::HighR => op.v_sw < crate::device::threshold_voltage(params, ambient_eff)?,
        Branch::LowR => op.v_sw > crate::device::holding_voltage(params, ambient_eff)?,
    })
}

/// Neither branch offers a stable operating point, so a constant supply
/// drives the switch through repeated on/off cycles.
pub fn oscillation_regime(v_dd: f64, r_s: f64, params: &SwitchParams, ambient_eff: f64) -> Result<bool> {
    let high = solve_operating_point(v_dd, r_s, Phase::Insulating, params, ambient_eff)?;
    let low = solve_operating_point(v_dd, r_s, Phase::Metallic, params, ambient_eff)?;
    Ok(!high.stable && !low.stable)
}
