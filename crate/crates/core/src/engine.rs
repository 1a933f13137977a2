//! Fixed-step simulation of thermally coupled neurons.
//!
//! Each step evaluates every neuron against the state at time `t` (drive,
//! induced temperature from the other neurons' emissions, operating point),
//! then advances phase machines and channel temperatures to `t + dt`.
//! Because all neurons are evaluated before any of them is updated, an
//! emission opened during a step is first seen by its neighbours on the next
//! step, and the result does not depend on neuron order.

use rayon::prelude::*;

use crate::circuit::{self, OperatingPoint};
use crate::device::{self, Phase, SwitchParams, SwitchState};
use crate::error::{Error, Result};
use crate::thermal::{self, EmissionRecord, ThermalKernel};

/// Supply voltage as a function of time.
#[derive(Debug, Clone, PartialEq)]
pub enum Waveform {
    Constant {
        level: f64,
    },
    /// Ideal rectangular pulse over `[start, start + duration)` on top of `baseline`.
    Pulse {
        level: f64,
        start: f64,
        duration: f64,
        baseline: f64,
    },
}

impl Waveform {
    pub fn value_at(&self, t: f64) -> f64 {
        match *self {
            Waveform::Constant { level } => level,
            Waveform::Pulse {
                level,
                start,
                duration,
                baseline,
            } => {
                if t >= start && t < start + duration {
                    level
                } else {
                    baseline
                }
            }
        }
    }

    /// Highest voltage the waveform ever applies.
    pub fn peak(&self) -> f64 {
        match *self {
            Waveform::Constant { level } => level,
            Waveform::Pulse { level, baseline, .. } => level.max(baseline),
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        match *self {
            Waveform::Constant { level } => {
                if !(level >= 0.0 && level.is_finite()) {
                    return Err(format!("level must be finite and >= 0, got {level}"));
                }
            }
            Waveform::Pulse {
                level,
                start,
                duration,
                baseline,
            } => {
                if !(level >= 0.0 && baseline >= 0.0 && level.is_finite() && baseline.is_finite()) {
                    return Err("pulse levels must be finite and >= 0".into());
                }
                if !start.is_finite() {
                    return Err("pulse start must be finite".into());
                }
                if !(duration > 0.0 && duration.is_finite()) {
                    return Err(format!("pulse duration must be > 0, got {duration}"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuronConfig {
    pub id: String,
    /// Position on the substrate (m).
    pub position: (f64, f64),
    pub r_s: f64,
    pub drive: Waveform,
    /// Per-neuron device override; the shared parameters apply when `None`.
    pub switch_params: Option<SwitchParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub ambient: f64,
    pub neurons: Vec<NeuronConfig>,
    pub kernel: ThermalKernel,
    pub switch_params: SwitchParams,
}

impl SimConfig {
    /// Checks every invariant. Errors carry the dotted key of the offending value.
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("dt", format!("must satisfy 0 < dt, got {}", self.dt)));
        }
        if !(self.t_end >= self.dt && self.t_end.is_finite()) {
            return Err(Error::config(
                "t_end",
                format!("must satisfy dt <= t_end, got dt = {} and t_end = {}", self.dt, self.t_end),
            ));
        }
        if !(self.ambient > 0.0 && self.ambient.is_finite()) {
            return Err(Error::config("ambient", "must be > 0 K"));
        }
        if self.neurons.is_empty() {
            return Err(Error::config("neurons", "at least one neuron is required"));
        }
        self.kernel
            .validate()
            .map_err(|e| Error::config("kernel", e.to_string()))?;
        self.switch_params
            .validate()
            .map_err(|e| Error::config("switch", e.to_string()))?;
        for (i, n) in self.neurons.iter().enumerate() {
            let key = |field: &str| format!("neurons.{}.{field}", n.id);
            if self.neurons[..i].iter().any(|m| m.id == n.id) {
                return Err(Error::config(key("id"), "duplicate neuron id"));
            }
            if !(n.r_s > 0.0 && n.r_s.is_finite()) {
                return Err(Error::config(key("r_s"), format!("must be > 0, got {}", n.r_s)));
            }
            if !(n.position.0.is_finite() && n.position.1.is_finite()) {
                return Err(Error::config(key("position"), "must be finite"));
            }
            n.drive.validate().map_err(|m| Error::config(key("drive"), m))?;
            if let Some(p) = &n.switch_params {
                p.validate().map_err(|e| Error::config(key("switch"), e.to_string()))?;
            }
            for m in &self.neurons[..i] {
                if distance(n.position, m.position) <= 0.0 {
                    return Err(Error::config(
                        key("position"),
                        format!("coincides with neuron `{}`", m.id),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn params_for(&self, index: usize) -> &SwitchParams {
        self.neurons[index]
            .switch_params
            .as_ref()
            .unwrap_or(&self.switch_params)
    }

    pub fn neuron_index(&self, id: &str) -> Option<usize> {
        self.neurons.iter().position(|n| n.id == id)
    }

    /// Number of steps taken by [`run`].
    pub fn step_count(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// One observation of a neuron.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub v_sw: f64,
    pub i_sw: f64,
    pub channel_temp: f64,
    /// Externally induced temperature rise (membrane potential).
    pub t_p: f64,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub neuron_id: String,
    pub samples: Vec<Sample>,
}

impl Trace {
    pub fn peak_current(&self) -> f64 {
        self.samples.iter().map(|s| s.i_sw).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn peak_t_p(&self) -> f64 {
        self.samples.iter().map(|s| s.t_p).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn fired(&self) -> bool {
        self.samples.iter().any(|s| s.phase.is_metallic())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpikeEvent {
    pub neuron_id: String,
    pub t_onset: f64,
    /// `None` if the neuron was still metallic at the end of the trace.
    pub t_offset: Option<f64>,
    pub peak_current: f64,
}

/// Dynamic state of a whole network.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub step: usize,
    pub switches: Vec<SwitchState>,
    /// Closed emissions, in order of closure.
    pub emissions: Vec<EmissionRecord>,
    /// Currently open emission per neuron.
    pub open: Vec<Option<EmissionRecord>>,
}

impl SimState {
    pub fn new(config: &SimConfig) -> Self {
        let n = config.neurons.len();
        Self {
            step: 0,
            switches: vec![SwitchState::new(config.ambient); n],
            emissions: Vec::new(),
            open: vec![None; n],
        }
    }

    pub fn time(&self, config: &SimConfig) -> f64 {
        self.step as f64 * config.dt
    }

    /// Every emission seen so far, closed ones first.
    pub fn all_emissions(&self) -> impl Iterator<Item = &EmissionRecord> {
        self.emissions.iter().chain(self.open.iter().flatten())
    }
}

#[derive(Debug, Clone, Copy)]
struct Evaluation {
    v_dd: f64,
    t_p: f64,
    ambient_eff: f64,
    op: OperatingPoint,
}

/// A validated configuration with precomputed pairwise distances.
#[derive(Debug, Clone)]
pub struct Network<'a> {
    config: &'a SimConfig,
    distances: Vec<Vec<f64>>,
}

impl<'a> Network<'a> {
    pub fn new(config: &'a SimConfig) -> Result<Self> {
        config.validate()?;
        let distances = config
            .neurons
            .iter()
            .map(|a| config.neurons.iter().map(|b| distance(a.position, b.position)).collect())
            .collect();
        Ok(Self { config, distances })
    }

    pub fn config(&self) -> &SimConfig {
        self.config
    }

    /// Distance between neurons `a` and `b` (m).
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.distances[a][b]
    }

    /// Membrane potential of neuron `target` at time `t`.
    pub fn membrane_potential(&self, state: &SimState, target: usize, t: f64) -> f64 {
        let kernel = &self.config.kernel;
        let mut total = 0.0;
        for e in state.all_emissions() {
            let source = self
                .config
                .neuron_index(&e.emitter_id)
                .expect("emissions only come from configured neurons");
            if source != target {
                total += thermal::response(kernel, e, self.distances[source][target], t);
            }
        }
        total
    }

    fn evaluate(&self, state: &SimState) -> Vec<Evaluation> {
        let t = state.time(self.config);
        self.config
            .neurons
            .iter()
            .enumerate()
            .map(|(j, n)| {
                let v_dd = n.drive.value_at(t);
                let t_p = self.membrane_potential(state, j, t);
                let ambient_eff = self.config.ambient + t_p;
                let params = self.config.params_for(j);
                let phase = state.switches[j].phase;
                let mut op = circuit::divider(v_dd, n.r_s, phase, params);
                op.stable = circuit::classify_stability(&op, params, ambient_eff).unwrap_or(false);
                Evaluation {
                    v_dd,
                    t_p,
                    ambient_eff,
                    op,
                }
            })
            .collect()
    }

    pub fn observe(&self, state: &SimState) -> Vec<Sample> {
        let t = state.time(self.config);
        self.evaluate(state)
            .iter()
            .zip(&state.switches)
            .map(|(ev, sw)| Sample {
                t,
                v_sw: ev.op.v_sw,
                i_sw: ev.op.i_sw,
                channel_temp: sw.channel_temp,
                t_p: ev.t_p,
                phase: sw.phase,
            })
            .collect()
    }

    pub fn step(&self, state: &SimState) -> SimState {
        let config = self.config;
        let dt = config.dt;
        let t_next = (state.step + 1) as f64 * dt;
        let evals = self.evaluate(state);
        let mut next = state.clone();
        next.step += 1;

        for (j, ev) in evals.iter().enumerate() {
            let params = config.params_for(j);
            let mut sw = state.switches[j].clone();
            sw.ambient_eff = ev.ambient_eff;
            let before = sw.phase;
            sw = device::update_phase(&sw, params, ev.op.v_sw, dt);
            sw = device::channel_thermal_step(&sw, ev.op.joule_power(), ev.ambient_eff, params, dt);

            match (before, sw.phase) {
                (Phase::Insulating, Phase::Metallic) => {
                    let on = circuit::divider(ev.v_dd, config.neurons[j].r_s, Phase::Metallic, params);
                    next.open[j] = Some(EmissionRecord {
                        emitter_id: config.neurons[j].id.clone(),
                        t_on: t_next,
                        t_off: None,
                        power_level: on.joule_power(),
                    });
                }
                (Phase::Metallic, Phase::Insulating) => {
                    if let Some(mut e) = next.open[j].take() {
                        e.t_off = Some(t_next);
                        next.emissions.push(e);
                    }
                }
                _ => {}
            }
            next.switches[j] = sw;
        }
        next
    }
}

/// Advance `state` by one step of `config`.
pub fn step(state: &SimState, config: &SimConfig) -> Result<SimState> {
    Ok(Network::new(config)?.step(state))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub traces: Vec<Trace>,
    pub events: Vec<SpikeEvent>,
    /// Every emission, including any still open at `t_end`.
    pub emissions: Vec<EmissionRecord>,
}

impl RunOutput {
    pub fn trace(&self, id: &str) -> Option<&Trace> {
        self.traces.iter().find(|t| t.neuron_id == id)
    }
}

/// Simulate from `t = 0` to `t_end`, recording one sample per neuron per step
/// plus the initial condition.
pub fn run(config: &SimConfig) -> Result<RunOutput> {
    let net = Network::new(config)?;
    let steps = config.step_count();
    let mut state = SimState::new(config);
    let mut traces: Vec<Trace> = config
        .neurons
        .iter()
        .map(|n| Trace {
            neuron_id: n.id.clone(),
            samples: Vec::with_capacity(steps + 1),
        })
        .collect();

    let record = |state: &SimState, traces: &mut Vec<Trace>| {
        for (trace, sample) in traces.iter_mut().zip(net.observe(state)) {
            trace.samples.push(sample);
        }
    };
    record(&state, &mut traces);
    for _ in 0..steps {
        state = net.step(&state);
        record(&state, &mut traces);
    }

    let events = traces.iter().flat_map(detect_spikes).collect();
    let emissions = state.all_emissions().cloned().collect();
    Ok(RunOutput {
        traces,
        events,
        emissions,
    })
}

/// One event per maximal run of metallic samples.
pub fn detect_spikes(trace: &Trace) -> Vec<SpikeEvent> {
    let mut events = Vec::new();
    let mut current: Option<SpikeEvent> = None;
    for s in &trace.samples {
        match (s.phase, current.as_mut()) {
            (Phase::Metallic, Some(ev)) => ev.peak_current = ev.peak_current.max(s.i_sw),
            (Phase::Metallic, None) => {
                current = Some(SpikeEvent {
                    neuron_id: trace.neuron_id.clone(),
                    t_onset: s.t,
                    t_offset: None,
                    peak_current: s.i_sw,
                })
            }
            (Phase::Insulating, Some(_)) => {
                let mut ev = current.take().unwrap();
                ev.t_offset = Some(s.t);
                events.push(ev);
            }
            (Phase::Insulating, None) => {}
        }
    }
    events.extend(current);
    events
}

/// Which neurons take part in a delay sweep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepRoles {
    pub emitter_a: String,
    pub emitter_b: String,
    pub target: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    /// Start of emitter B's pulse minus start of emitter A's pulse (s).
    pub delta_t: f64,
    pub peak_current: f64,
    pub fired: bool,
}

/// Copy of `base` with emitter B's pulse starting `delta_t` after emitter A's.
pub fn shifted_config(base: &SimConfig, roles: &SweepRoles, delta_t: f64) -> Result<SimConfig> {
    let index = |id: &str, key: &str| {
        base.neuron_index(id)
            .ok_or_else(|| Error::config(format!("sweep.{key}"), format!("unknown neuron `{id}`")))
    };
    let a = index(&roles.emitter_a, "emitter_a")?;
    let b = index(&roles.emitter_b, "emitter_b")?;
    index(&roles.target, "target")?;
    let Waveform::Pulse { start: start_a, .. } = base.neurons[a].drive else {
        return Err(Error::config(
            format!("neurons.{}.drive.kind", roles.emitter_a),
            "sweep emitters must be driven by pulses",
        ));
    };
    let mut config = base.clone();
    match &mut config.neurons[b].drive {
        Waveform::Pulse { start, .. } => *start = start_a + delta_t,
        Waveform::Constant { .. } => {
            return Err(Error::config(
                format!("neurons.{}.drive.kind", roles.emitter_b),
                "sweep emitters must be driven by pulses",
            ))
        }
    }
    Ok(config)
}

/// Peak target current for each inter-pulse delay. Runs execute in parallel;
/// the result is ordered by ascending `delta_t`.
pub fn sweep_delta_t(base: &SimConfig, roles: &SweepRoles, offsets: &[f64]) -> Result<Vec<SweepPoint>> {
    base.validate()?;
    let mut points = offsets
        .par_iter()
        .map(|&delta_t| {
            let config = shifted_config(base, roles, delta_t)?;
            let out = run(&config)?;
            let trace = out.trace(&roles.target).expect("target validated above");
            Ok(SweepPoint {
                delta_t,
                peak_current: trace.peak_current(),
                fired: trace.fired(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| a.delta_t.total_cmp(&b.delta_t));
    Ok(points)
}

/// Bounds of the delays that fire the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiringWindow {
    pub start: f64,
    pub end: f64,
    /// Whether every grid point between `start` and `end` fired.
    pub contiguous: bool,
}

impl FiringWindow {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.start + self.end)
    }

    pub fn span(&self) -> f64 {
        self.end - self.start
    }
}

pub fn firing_window(points: &[SweepPoint]) -> Option<FiringWindow> {
    let first = points.iter().position(|p| p.fired)?;
    let last = points.iter().rposition(|p| p.fired)?;
    Some(FiringWindow {
        start: points[first].delta_t,
        end: points[last].delta_t,
        contiguous: points[first..=last].iter().all(|p| p.fired),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(drive: Waveform, r_s: f64) -> SimConfig {
        SimConfig {
            dt: 1e-9,
            t_end: 2e-6,
            ambient: 300.0,
            neurons: vec![NeuronConfig {
                id: "n1".into(),
                position: (0.0, 0.0),
                r_s,
                drive,
                switch_params: None,
            }],
            kernel: ThermalKernel::default(),
            switch_params: SwitchParams::default(),
        }
    }

    #[test]
    fn waveform_edges() {
        let w = Waveform::Pulse {
            level: 6.0,
            start: 1e-7,
            duration: 3e-7,
            baseline: 0.5,
        };
        assert_eq!(w.value_at(0.0), 0.5);
        assert_eq!(w.value_at(1e-7), 6.0);
        assert_eq!(w.value_at(4e-7), 0.5);
        assert_eq!(w.peak(), 6.0);
    }

    #[test]
    fn dead_network_only_advances_time() {
        let mut config = single(Waveform::Constant { level: 0.0 }, 1e3);
        config.neurons.push(NeuronConfig {
            id: "n2".into(),
            position: (2e-6, 0.0),
            ..config.neurons[0].clone()
        });
        let s0 = SimState::new(&config);
        let s1 = step(&s0, &config).unwrap();
        assert_eq!(s1.step, 1);
        assert_eq!(s1.switches, s0.switches);
        assert_eq!(s1.all_emissions().count(), 0);
    }

    #[test]
    fn minimal_run_has_two_samples() {
        let mut config = single(Waveform::Constant { level: 1.0 }, 1e3);
        config.t_end = config.dt;
        let out = run(&config).unwrap();
        assert_eq!(out.traces[0].samples.len(), 2);
        assert_eq!(out.traces[0].samples[1].t, config.dt);
    }

    #[test]
    fn invalid_config_is_rejected_before_stepping() {
        let mut config = single(Waveform::Constant { level: 1.0 }, 1e3);
        config.dt = 0.0;
        assert!(matches!(run(&config), Err(Error::Config { key, .. }) if key == "dt"));

        let mut config = single(Waveform::Constant { level: 1.0 }, -1.0);
        config.dt = 1e-9;
        assert!(matches!(run(&config), Err(Error::Config { key, .. }) if key == "neurons.n1.r_s"));

        let mut config = single(Waveform::Constant { level: 1.0 }, 1e3);
        config.neurons.push(config.neurons[0].clone());
        assert!(run(&config).is_err());
    }

    #[test]
    fn pulse_driven_neuron_switches_and_emits() {
        let config = single(
            Waveform::Pulse {
                level: 6.0,
                start: 100e-9,
                duration: 300e-9,
                baseline: 0.0,
            },
            1e3,
        );
        let out = run(&config).unwrap();
        assert_eq!(out.events.len(), 1);
        let ev = &out.events[0];
        // 33 ns channel formation, 80 ns collapse after the pulse ends
        assert!((ev.t_onset - 133e-9).abs() < 1.5e-9, "onset {}", ev.t_onset);
        assert!((ev.t_offset.unwrap() - 480e-9).abs() < 1.5e-9);
        assert!(ev.peak_current <= 6.0 / 1e3);
        assert_eq!(out.emissions.len(), 1);
        let e = &out.emissions[0];
        assert_eq!(e.t_on, ev.t_onset);
        assert_eq!(e.t_off, ev.t_offset);
        let i_on = 6.0 / 1630.0;
        assert!((e.power_level - i_on * i_on * 630.0).abs() < 1e-12);
    }

    #[test]
    fn sub_tau_on_pulse_does_not_switch() {
        let config = single(
            Waveform::Pulse {
                level: 6.0,
                start: 100e-9,
                duration: 30e-9,
                baseline: 0.0,
            },
            1e3,
        );
        let out = run(&config).unwrap();
        assert!(out.events.is_empty());
    }

    #[test]
    fn spikes_from_hand_built_trace() {
        let mk = |t: f64, phase| Sample {
            t,
            v_sw: 1.0,
            i_sw: if phase == Phase::Metallic { 2.0 } else { 1.0 } + t,
            channel_temp: 300.0,
            t_p: 0.0,
            phase,
        };
        use Phase::*;
        let phases = [Insulating, Metallic, Metallic, Insulating, Metallic];
        let trace = Trace {
            neuron_id: "x".into(),
            samples: phases.iter().enumerate().map(|(i, &p)| mk(i as f64, p)).collect(),
        };
        let ev = detect_spikes(&trace);
        assert_eq!(ev.len(), 2);
        assert_eq!((ev[0].t_onset, ev[0].t_offset, ev[0].peak_current), (1.0, Some(3.0), 4.0));
        assert_eq!((ev[1].t_onset, ev[1].t_offset), (4.0, None));

        let quiet = Trace {
            neuron_id: "x".into(),
            samples: vec![mk(0.0, Insulating); 4],
        };
        assert!(detect_spikes(&quiet).is_empty());
    }

    #[test]
    fn window_bounds() {
        let p = |d: f64, fired| SweepPoint {
            delta_t: d,
            peak_current: 0.0,
            fired,
        };
        assert!(firing_window(&[p(0.0, false)]).is_none());
        let w = firing_window(&[p(-2.0, false), p(-1.0, true), p(0.0, true), p(1.0, false)]).unwrap();
        assert_eq!((w.start, w.end, w.contiguous), (-1.0, 0.0, true));
        assert_eq!(w.midpoint(), -0.5);
        let w = firing_window(&[p(-1.0, true), p(0.0, false), p(1.0, true)]).unwrap();
        assert!(!w.contiguous);
    }
}
