//! Substrate thermal coupling between switches.
//!
//! Every metallic interval of a switch emits a thermal pulse. The pulse
//! reaches a target at distance `r` after `r / wave_speed`, is attenuated by
//! `exp(-r / decay_length)` and has a rise/fall shape:
//!
//! ```text
//! s(u) = 1 - exp(-u / rise_tau)                      while emitting
//! s(u) = s(u_off) * exp(-(u - u_off) / fall_tau)     after emission ends
//! ```
//!
//! The membrane potential of a target is the plain sum of all incident
//! pulses, and the target fires once it reaches the thermal threshold.

use std::collections::BTreeMap;

use crate::device::SwitchParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ThermalKernel {
    /// Propagation speed along the substrate (m/s).
    pub wave_speed: f64,
    /// Distance over which the amplitude falls by `1/e` (m).
    pub decay_length: f64,
    /// Temperature rise per unit emitter power at zero distance (K/W).
    pub coupling_gain: f64,
    pub rise_tau: f64,
    pub fall_tau: f64,
}

impl Default for ThermalKernel {
    /// Calibrated so that a 300 ns, 6 V pulse on a 1 kOhm neuron induces a
    /// peak rise of about 14 K two micrometres away.
    fn default() -> Self {
        Self {
            wave_speed: 6.0,
            decay_length: 2e-6,
            coupling_gain: 8938.0,
            rise_tau: 500e-9,
            fall_tau: 500e-9,
        }
    }
}

impl ThermalKernel {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.wave_speed,
            self.decay_length,
            self.coupling_gain,
            self.rise_tau,
            self.fall_tau,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("kernel parameters must be finite".into()));
        }
        if !(self.wave_speed > 0.0 && self.decay_length > 0.0 && self.coupling_gain >= 0.0) {
            return Err(Error::InvalidInput(
                "require wave_speed > 0, decay_length > 0, coupling_gain >= 0".into(),
            ));
        }
        if !(self.rise_tau > 0.0 && self.fall_tau >= self.rise_tau) {
            return Err(Error::InvalidInput("require 0 < rise_tau <= fall_tau".into()));
        }
        Ok(())
    }

    pub fn travel_time(&self, r: f64) -> f64 {
        r / self.wave_speed
    }
}

/// One metallic interval of an emitter. `t_off` is `None` while still open.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionRecord {
    pub emitter_id: String,
    pub t_on: f64,
    pub t_off: Option<f64>,
    pub power_level: f64,
}

/// Temperature rise at distance `r` and time `t` caused by `emission`.
pub fn pulse_response(kernel: &ThermalKernel, emission: &EmissionRecord, r: f64, t: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidInput(format!(
            "emitter distance must be positive, got {r} m"
        )));
    }
    Ok(response(kernel, emission, r, t))
}

pub(crate) fn response(kernel: &ThermalKernel, emission: &EmissionRecord, r: f64, t: f64) -> f64 {
    let lag = kernel.travel_time(r);
    let u = t - emission.t_on - lag;
    if u < 0.0 {
        return 0.0;
    }
    let amplitude = kernel.coupling_gain * emission.power_level * (-r / kernel.decay_length).exp();
    let rise = |u: f64| -(-u / kernel.rise_tau).exp_m1();
    match emission.t_off {
        Some(t_off) if t >= t_off + lag => {
            let u_off = t_off - emission.t_on;
            amplitude * rise(u_off) * (-(u - u_off) / kernel.fall_tau).exp()
        }
        _ => amplitude * rise(u),
    }
}

/// Superposition of all incident pulses at one target.
pub fn membrane_potential(
    kernel: &ThermalKernel,
    emissions: &[EmissionRecord],
    distances: &BTreeMap<String, f64>,
    t: f64,
) -> Result<f64> {
    emissions.iter().try_fold(0.0, |acc, e| {
        let r = *distances
            .get(&e.emitter_id)
            .ok_or_else(|| Error::config(format!("distances.{}", e.emitter_id), "no distance for emitter"))?;
        Ok(acc + pulse_response(kernel, e, r, t)?)
    })
}

pub fn fires(t_p: f64, t_p_threshold: f64) -> bool {
    t_p >= t_p_threshold
}

/// Smallest externally induced rise that brings the insulating operating
/// point of a `(v_dd, r_s)` neuron up to its threshold voltage.
///
/// Returns zero if the neuron is already at or above threshold at `ambient`.
/// Capped at the rise that reaches the phase-transition temperature.
pub fn effective_threshold(v_dd: f64, r_s: f64, params: &SwitchParams, ambient: f64) -> Result<f64> {
    let op = crate::circuit::solve_operating_point(v_dd, r_s, crate::device::Phase::Insulating, params, ambient)?;
    let to_transition = (params.t_transition - ambient).max(0.0);
    if op.v_sw <= 0.0 {
        return Ok(to_transition);
    }
    // v_th_ref * 2^(-(ambient + dT - t_ref)/h) = v_sw
    let rise = params.halving_interval * (params.v_th_ref / op.v_sw).log2() - (ambient - params.t_ref);
    Ok(rise.clamp(0.0, to_transition))
}
