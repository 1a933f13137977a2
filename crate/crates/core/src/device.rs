//! Lumped hysteretic VO2 switch.
//!
//! The switch has two strictly linear branches (insulating `r_off`, metallic
//! `r_on`). It turns on when the voltage across it reaches the threshold
//! voltage and turns off when it falls to the holding voltage. Both voltages
//! shrink with the effective ambient temperature seen by the channel:
//!
//! ```text
//! V(T) = V_ref * 2^(-(T - T_ref) / halving_interval)   for T < T_transition
//! V(T) = 0                                             for T >= T_transition
//! ```
//!
//! Transitions are not instantaneous. A pending transition accumulates
//! progress `dt / delay` each step while its trigger condition holds, where
//! the turn-on delay depends on the instantaneous overdrive, and commits once
//! the accumulated progress reaches one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Progress slack that absorbs rounding when `delay` is an integer multiple of `dt`.
const COMMIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Insulating,
    Metallic,
}

impl Phase {
    pub fn is_metallic(self) -> bool {
        matches!(self, Phase::Metallic)
    }
}

/// Static device constants. All quantities are SI.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchParams {
    pub r_off: f64,
    pub r_on: f64,
    /// Threshold (switch-on) voltage at `t_ref`.
    pub v_th_ref: f64,
    /// Current at the switch-on point. Informational only.
    pub i_th_ref: f64,
    /// Holding (switch-off) voltage at `t_ref`.
    pub v_h_ref: f64,
    /// Current at the switch-off point. Informational only.
    pub i_h_ref: f64,
    pub t_ref: f64,
    /// Above this temperature the insulating branch no longer exists.
    pub t_transition: f64,
    /// Ambient rise that halves the threshold and holding voltages.
    pub halving_interval: f64,
    pub tau_on_base: f64,
    pub tau_on_sensitivity: f64,
    pub tau_off: f64,
    pub thermal_time_constant: f64,
    pub thermal_conductance: f64,
}

impl Default for SwitchParams {
    /// Calibrated defaults for the 1 um x 1 um Au-VO2-Au planar switch.
    fn default() -> Self {
        Self {
            r_off: 57.6e3,
            r_on: 630.0,
            v_th_ref: 5.0,
            i_th_ref: 1.3e-4,
            v_h_ref: 1.45,
            i_h_ref: 1.7e-3,
            t_ref: 300.0,
            t_transition: 340.0,
            halving_interval: 10.0,
            // 100 ns at zero overdrive, 33 ns at the 6 V / 1 kOhm pulse drive.
            tau_on_base: 100e-9,
            tau_on_sensitivity: 1.235,
            tau_off: 80e-9,
            thermal_time_constant: 100e-9,
            thermal_conductance: 1e-4,
        }
    }
}

impl SwitchParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.r_off,
            self.r_on,
            self.v_th_ref,
            self.i_th_ref,
            self.v_h_ref,
            self.i_h_ref,
            self.t_ref,
            self.t_transition,
            self.halving_interval,
            self.tau_on_base,
            self.tau_on_sensitivity,
            self.tau_off,
            self.thermal_time_constant,
            self.thermal_conductance,
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("switch parameters must be finite".into()));
        }
        if !(self.r_off > self.r_on && self.r_on > 0.0) {
            return Err(Error::InvalidInput("require r_off > r_on > 0".into()));
        }
        if !(self.v_th_ref > self.v_h_ref && self.v_h_ref > 0.0) {
            return Err(Error::InvalidInput("require v_th_ref > v_h_ref > 0".into()));
        }
        if !(self.t_transition > self.t_ref) {
            return Err(Error::InvalidInput("require t_transition > t_ref".into()));
        }
        if !(self.halving_interval > 0.0) {
            return Err(Error::InvalidInput("require halving_interval > 0".into()));
        }
        if !(self.tau_on_base > 0.0
            && self.tau_off > 0.0
            && self.thermal_time_constant > 0.0
            && self.thermal_conductance > 0.0)
        {
            return Err(Error::InvalidInput(
                "require tau_on_base, tau_off, thermal_time_constant, thermal_conductance > 0"
                    .into(),
            ));
        }
        Ok(())
    }

    pub fn branch_resistance(&self, phase: Phase) -> f64 {
        match phase {
            Phase::Insulating => self.r_off,
            Phase::Metallic => self.r_on,
        }
    }

    /// Multiplier applied to the reference threshold/holding voltages.
    fn thermal_scale(&self, ambient_eff: f64) -> f64 {
        if ambient_eff >= self.t_transition {
            0.0
        } else {
            (-(ambient_eff - self.t_ref) / self.halving_interval).exp2()
        }
    }
}

fn check_ambient(ambient_eff: f64) -> Result<()> {
    if !ambient_eff.is_finite() {
        return Err(Error::InvalidInput(format!(
            "ambient temperature must be finite, got {ambient_eff}"
        )));
    }
    if ambient_eff <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "ambient temperature must be positive, got {ambient_eff} K"
        )));
    }
    Ok(())
}

/// Switch-on voltage at the given effective ambient temperature.
pub fn threshold_voltage(params: &SwitchParams, ambient_eff: f64) -> Result<f64> {
    check_ambient(ambient_eff)?;
    Ok(params.v_th_ref * params.thermal_scale(ambient_eff))
}

/// Switch-off voltage; follows the same thermal law as [`threshold_voltage`].
pub fn holding_voltage(params: &SwitchParams, ambient_eff: f64) -> Result<f64> {
    check_ambient(ambient_eff)?;
    Ok(params.v_h_ref * params.thermal_scale(ambient_eff))
}

pub fn branch_current(params: &SwitchParams, phase: Phase, v_sw: f64) -> f64 {
    v_sw / params.branch_resistance(phase)
}

/// Channel-formation delay for a drive `overdrive` volts above threshold.
///
/// Callers that integrate in time clamp the result to at least one step.
pub fn turn_on_delay(params: &SwitchParams, overdrive: f64) -> Result<f64> {
    if !(overdrive >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "overdrive must be non-negative, got {overdrive} V"
        )));
    }
    Ok(params.tau_on_base * (-params.tau_on_sensitivity * overdrive).exp())
}

/// A transition that has been triggered but not yet committed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendingTransition {
    pub target: Phase,
    /// Fraction of the delay already elapsed, in `[0, 1)`.
    pub progress: f64,
    /// Delay implied by the most recent trigger evaluation.
    pub delay: f64,
}

impl PendingTransition {
    /// Time left before commit if the current delay stays in force.
    pub fn time_remaining(&self) -> f64 {
        ((1.0 - self.progress) * self.delay).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchState {
    pub phase: Phase,
    pub channel_temp: f64,
    pub transition: Option<PendingTransition>,
    /// Ambient temperature plus the externally induced rise, T0 + T_P.
    pub ambient_eff: f64,
}

impl SwitchState {
    pub fn new(ambient: f64) -> Self {
        Self {
            phase: Phase::Insulating,
            channel_temp: ambient,
            transition: None,
            ambient_eff: ambient,
        }
    }
}

/// Advance the phase machine by `dt` for a switch that currently sees `v_sw`.
///
/// Turn-on is triggered by `v_sw >= V_th(ambient_eff)` and turn-off by
/// `v_sw <= V_h(ambient_eff)`. A pending transition is dropped as soon as its
/// trigger stops holding.
pub fn update_phase(state: &SwitchState, params: &SwitchParams, v_sw: f64, dt: f64) -> SwitchState {
    let mut next = state.clone();
    let scale = params.thermal_scale(state.ambient_eff);

    let trigger = match state.phase {
        Phase::Insulating => {
            let v_th = params.v_th_ref * scale;
            (v_sw >= v_th).then(|| {
                let overdrive = v_sw - v_th;
                let delay = params.tau_on_base * (-params.tau_on_sensitivity * overdrive).exp();
                (Phase::Metallic, delay.max(dt))
            })
        }
        Phase::Metallic => {
            let v_h = params.v_h_ref * scale;
            (v_sw <= v_h).then_some((Phase::Insulating, params.tau_off.max(dt)))
        }
    };

    next.transition = match trigger {
        None => None,
        Some((target, delay)) => {
            let progress = state.transition.map_or(0.0, |p| p.progress) + dt / delay;
            if progress >= 1.0 - COMMIT_TOLERANCE {
                next.phase = target;
                None
            } else {
                Some(PendingTransition {
                    target,
                    progress,
                    delay,
                })
            }
        }
    };
    next
}

/// Exact exponential step of the lumped channel heat balance
/// `G * tau * dT/dt = P - G * (T - T_amb)`.
pub fn channel_thermal_step(
    state: &SwitchState,
    joule_power: f64,
    ambient_eff: f64,
    params: &SwitchParams,
    dt: f64,
) -> SwitchState {
    let steady = ambient_eff + joule_power / params.thermal_conductance;
    let decay = (-dt / params.thermal_time_constant).exp();
    SwitchState {
        channel_temp: steady + (state.channel_temp - steady) * decay,
        ambient_eff,
        ..state.clone()
    }
}
