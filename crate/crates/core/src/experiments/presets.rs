//! Preset scenarios and the document-driven scenario runner.
//!
//! What a document runs is decided by the document alone, so a saved
//! snapshot reproduces its artifact:
//!
//! - a `ramp` block runs a quasi-static I-V sweep of the first neuron;
//! - a `sweep` block with a delay grid runs an inter-pulse delay sweep;
//! - a `sweep` block without a grid runs the summation experiment (both
//!   emitters together, then each alone);
//! - otherwise the network is simulated once.

use std::fmt;
use std::str::FromStr;

use crate::circuit;
use crate::device::{self, Phase, SwitchState};
use crate::engine::{self, SimConfig, SpikeEvent, SweepPoint, Trace, Waveform};
use crate::error::{Error, Result};
use crate::thermal;

use super::config::{delay_grid, ConfigDocument, DriveDoc, KernelDoc, NeuronDoc, RampDoc, SweepDoc, SwitchDoc};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PresetName {
    IvCurve,
    Fig4aSubthreshold,
    Fig4bFire,
    Fig4cSummation,
    Fig5Sweep,
    Oscillation,
}

impl PresetName {
    pub const ALL: [PresetName; 6] = [
        PresetName::IvCurve,
        PresetName::Fig4aSubthreshold,
        PresetName::Fig4bFire,
        PresetName::Fig4cSummation,
        PresetName::Fig5Sweep,
        PresetName::Oscillation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::IvCurve => "iv_curve",
            PresetName::Fig4aSubthreshold => "fig4a_subthreshold",
            PresetName::Fig4bFire => "fig4b_fire",
            PresetName::Fig4cSummation => "fig4c_summation",
            PresetName::Fig5Sweep => "fig5_sweep",
            PresetName::Oscillation => "oscillation",
        }
    }

    /// Calibrated document for this preset, before any overrides.
    pub fn document(self) -> ConfigDocument {
        match self {
            PresetName::IvCurve => iv_document(),
            PresetName::Fig4aSubthreshold => three_neuron(DriveDoc::pulse(6.0, 100.0, 300.0), DriveDoc::constant(0.0)),
            PresetName::Fig4bFire => three_neuron(DriveDoc::pulse(6.0, 100.0, 550.0), DriveDoc::constant(0.0)),
            PresetName::Fig4cSummation => {
                let mut doc = three_neuron(
                    DriveDoc::pulse(6.0, 300.0, SHORT_PULSE_NS),
                    DriveDoc::pulse(6.0, 200.0, SHORT_PULSE_NS),
                );
                doc.sweep = Some(roles(None));
                doc
            }
            PresetName::Fig5Sweep => {
                let mut doc = three_neuron(
                    DriveDoc::pulse(6.0, 600.0, SHORT_PULSE_NS),
                    DriveDoc::pulse(6.0, 600.0, SHORT_PULSE_NS),
                );
                doc.sweep = Some(roles(Some((-500.0, 280.0, 20.0))));
                doc
            }
            PresetName::Oscillation => {
                let mut doc = base_document(3000.0);
                doc.neurons.insert(
                    "n1".into(),
                    NeuronDoc {
                        x_um: 0.0,
                        y_um: 0.0,
                        r_s_ohm: 5e3,
                        drive: DriveDoc::constant(6.0),
                        switch: None,
                    },
                );
                doc
            }
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PresetName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = PresetName::ALL.iter().map(|p| p.as_str()).collect();
                Error::config("preset", format!("unknown preset `{s}`, expected one of {}", names.join(", ")))
            })
    }
}

/// Pulse length for the summation experiments; a single pulse of this length
/// from either emitter stays below the target's threshold.
const SHORT_PULSE_NS: f64 = 200.0;

fn base_document(t_end_ns: f64) -> ConfigDocument {
    ConfigDocument {
        dt_ns: 1.0,
        t_end_ns,
        ambient_k: 300.0,
        kernel: KernelDoc::default(),
        switch: SwitchDoc::default(),
        neurons: Default::default(),
        sweep: None,
        ramp: None,
    }
}

/// Emitters 1 and 2 on either side of target 3, 2 um and 3 um away.
fn three_neuron(drive_1: DriveDoc, drive_2: DriveDoc) -> ConfigDocument {
    let mut doc = base_document(3000.0);
    let neuron = |x_um, r_s_ohm, drive| NeuronDoc {
        x_um,
        y_um: 0.0,
        r_s_ohm,
        drive,
        switch: None,
    };
    doc.neurons.insert("n1".into(), neuron(-2.0, 1e3, drive_1));
    doc.neurons.insert("n2".into(), neuron(3.0, 1e3, drive_2));
    doc.neurons.insert("n3".into(), neuron(0.0, 500.0, DriveDoc::constant(1.8)));
    doc
}

fn roles(grid: Option<(f64, f64, f64)>) -> SweepDoc {
    SweepDoc {
        emitter_a: "n1".into(),
        emitter_b: "n2".into(),
        target: "n3".into(),
        dt_start_ns: grid.map(|g| g.0),
        dt_end_ns: grid.map(|g| g.1),
        dt_step_ns: grid.map(|g| g.2),
    }
}

fn iv_document() -> ConfigDocument {
    let mut doc = base_document(1.0);
    doc.neurons.insert(
        "n1".into(),
        NeuronDoc {
            x_um: 0.0,
            y_um: 0.0,
            // sense resistor; the supply is effectively applied across the switch
            r_s_ohm: 1.0,
            drive: DriveDoc::constant(0.0),
            switch: None,
        },
    );
    doc.ramp = Some(RampDoc {
        v_max_v: 6.0,
        step_mv: 1.0,
        slew_v_per_s: 1e3,
    });
    doc
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioPreset {
    pub name: PresetName,
    /// `(dotted key, value)` pairs applied on top of the calibrated document.
    pub overrides: Vec<(String, String)>,
}

impl ScenarioPreset {
    pub fn new(name: PresetName) -> Self {
        Self {
            name,
            overrides: Vec::new(),
        }
    }

    pub fn resolve(&self) -> Result<ConfigDocument> {
        self.overrides
            .iter()
            .try_fold(self.name.document(), |doc, (k, v)| doc.with_override(k, v))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    /// Named scalar results, in a fixed order.
    pub scalars: Vec<(String, f64)>,
    /// Per-delay results of a sweep, ordered by delay. Empty otherwise.
    pub sweep: Vec<SweepPoint>,
}

impl Summary {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.scalars.iter().find(|(k, _)| k == name).map(|&(_, v)| v)
    }

    fn push(&mut self, name: impl Into<String>, value: f64) {
        self.scalars.push((name.into(), value));
    }

    fn flag(&mut self, name: impl Into<String>, value: bool) {
        self.push(name, if value { 1.0 } else { 0.0 });
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifact {
    /// Fully resolved configuration that produced this artifact.
    pub config: ConfigDocument,
    pub traces: Vec<Trace>,
    pub events: Vec<SpikeEvent>,
    pub summary: Summary,
}

pub fn run_scenario(preset: &ScenarioPreset) -> Result<RunArtifact> {
    run_document(&preset.resolve()?)
}

pub fn run_document(doc: &ConfigDocument) -> Result<RunArtifact> {
    let config = doc.to_sim_config()?;
    match (&doc.ramp, &doc.sweep) {
        (Some(ramp), _) => run_iv(doc, &config, ramp),
        (None, Some(sweep)) if sweep.dt_start_ns.is_some() || sweep.dt_end_ns.is_some() || sweep.dt_step_ns.is_some() => {
            let grid = |v: Option<f64>, key: &str| {
                v.ok_or_else(|| Error::config(format!("sweep.{key}"), "a delay grid needs dt_start_ns, dt_end_ns and dt_step_ns"))
            };
            let offsets = delay_grid(
                grid(sweep.dt_start_ns, "dt_start_ns")?,
                grid(sweep.dt_end_ns, "dt_end_ns")?,
                grid(sweep.dt_step_ns, "dt_step_ns")?,
            )?;
            run_sweep(doc, &config, sweep, &offsets)
        }
        (None, Some(sweep)) => run_summation(doc, &config, sweep),
        (None, None) => {
            let out = engine::run(&config)?;
            let summary = trace_summary(&config, &out.traces, &out.events);
            Ok(RunArtifact {
                config: doc.clone(),
                traces: out.traces,
                events: out.events,
                summary,
            })
        }
    }
}

/// Delay sweep over `offsets` (seconds) using the roles in `sweep`.
pub fn run_sweep(doc: &ConfigDocument, config: &SimConfig, sweep: &SweepDoc, offsets: &[f64]) -> Result<RunArtifact> {
    let roles = sweep.roles();
    let points = engine::sweep_delta_t(config, &roles, offsets)?;

    let mut summary = Summary::default();
    let idx = |id: &str| config.neuron_index(id).expect("roles validated with the document");
    let net = engine::Network::new(config)?;
    let target = idx(&roles.target);
    let lag_a = config.kernel.travel_time(net.distance(idx(&roles.emitter_a), target));
    let lag_b = config.kernel.travel_time(net.distance(idx(&roles.emitter_b), target));
    summary.push("arrival_lag_difference_s", lag_b - lag_a);
    summary.push("target_subthreshold_current_A", {
        let n = &config.neurons[target];
        n.drive.value_at(0.0) / (n.r_s + config.params_for(target).r_off)
    });
    match engine::firing_window(&points) {
        Some(w) => {
            summary.push("window_start_s", w.start);
            summary.push("window_end_s", w.end);
            summary.push("window_midpoint_s", w.midpoint());
            summary.flag("window_contiguous", w.contiguous);
        }
        None => summary.push("window_points", 0.0),
    }
    summary.sweep = points;
    Ok(RunArtifact {
        config: doc.clone(),
        traces: Vec::new(),
        events: Vec::new(),
        summary,
    })
}

/// Both emitters together, then each alone with the other's drive grounded.
fn run_summation(doc: &ConfigDocument, config: &SimConfig, sweep: &SweepDoc) -> Result<RunArtifact> {
    let target = &sweep.target;
    let combined = engine::run(config)?;
    let mut summary = trace_summary(config, &combined.traces, &combined.events);

    for (label, silenced) in [("emitter_a_alone", &sweep.emitter_b), ("emitter_b_alone", &sweep.emitter_a)] {
        let mut solo = config.clone();
        let i = solo.neuron_index(silenced).expect("roles validated with the document");
        solo.neurons[i].drive = Waveform::Constant { level: 0.0 };
        let out = engine::run(&solo)?;
        let trace = out.trace(target).expect("target validated with the document");
        summary.flag(format!("{label}.fired"), trace.fired());
        summary.push(format!("{label}.peak_t_p_K"), trace.peak_t_p());
    }
    let trace = combined.trace(target).expect("target validated with the document");
    summary.flag("combined.fired", trace.fired());
    summary.push("combined.peak_t_p_K", trace.peak_t_p());

    Ok(RunArtifact {
        config: doc.clone(),
        traces: combined.traces,
        events: combined.events,
        summary,
    })
}

fn trace_summary(config: &SimConfig, traces: &[Trace], events: &[SpikeEvent]) -> Summary {
    let mut summary = Summary::default();
    for (j, (n, trace)) in config.neurons.iter().zip(traces).enumerate() {
        let id = &n.id;
        let params = config.params_for(j);
        let mine: Vec<&SpikeEvent> = events.iter().filter(|e| &e.neuron_id == id).collect();
        summary.push(format!("{id}.peak_t_p_K"), trace.peak_t_p());
        summary.push(format!("{id}.peak_current_A"), trace.peak_current());
        summary.flag(format!("{id}.fired"), !mine.is_empty());
        summary.push(format!("{id}.spike_count"), mine.len() as f64);
        if let Ok(th) = thermal::effective_threshold(n.drive.peak(), n.r_s, params, config.ambient) {
            summary.push(format!("{id}.effective_threshold_K"), th);
        }
        if let Some(first) = trace.samples.iter().find(|s| s.phase.is_metallic()) {
            summary.push(format!("{id}.t_p_at_onset_K"), first.t_p);
        }
        if let Waveform::Constant { level } = n.drive {
            if let Ok(osc) = circuit::oscillation_regime(level, n.r_s, params, config.ambient) {
                summary.flag(format!("{id}.oscillation_regime"), osc);
            }
        }
        let onsets: Vec<f64> = mine.iter().map(|e| e.t_onset).collect();
        if onsets.len() >= 3 {
            let intervals: Vec<f64> = onsets.windows(2).map(|w| w[1] - w[0]).collect();
            let (mean, cv) = mean_and_cv(&intervals);
            summary.push(format!("{id}.mean_interval_s"), mean);
            summary.push(format!("{id}.interval_cv"), cv);
        }
    }
    summary
}

/// Mean and coefficient of variation (population standard deviation over mean).
pub fn mean_and_cv(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt() / mean)
}

/// Quasi-static up/down supply ramp on the first neuron.
fn run_iv(doc: &ConfigDocument, config: &SimConfig, ramp: &RampDoc) -> Result<RunArtifact> {
    if !(ramp.v_max_v > 0.0 && ramp.step_mv > 0.0 && ramp.slew_v_per_s > 0.0) {
        return Err(Error::config("ramp", "v_max_v, step_mv and slew_v_per_s must be > 0"));
    }
    let neuron = &config.neurons[0];
    let params = config.params_for(0);
    let step_v = ramp.step_mv * 1e-3;
    let dwell = step_v / ramp.slew_v_per_s;
    let n = (ramp.v_max_v / step_v).round() as usize;
    let supply = (0..=n).chain((0..n).rev()).map(|k| k as f64 * step_v);

    let mut state = SwitchState::new(config.ambient);
    let mut samples = Vec::with_capacity(2 * n + 1);
    let (mut v_on, mut v_off) = (None, None);
    for (k, v_dd) in supply.enumerate() {
        let op = circuit::solve_operating_point(v_dd, neuron.r_s, state.phase, params, config.ambient)?;
        samples.push(engine::Sample {
            t: k as f64 * dwell,
            v_sw: op.v_sw,
            i_sw: op.i_sw,
            channel_temp: state.channel_temp,
            t_p: 0.0,
            phase: state.phase,
        });
        let before = state.phase;
        state = device::update_phase(&state, params, op.v_sw, dwell);
        state = device::channel_thermal_step(&state, op.joule_power(), config.ambient, params, dwell);
        match (before, state.phase) {
            (Phase::Insulating, Phase::Metallic) if v_on.is_none() => v_on = Some(op.v_sw),
            (Phase::Metallic, Phase::Insulating) if v_off.is_none() => v_off = Some(op.v_sw),
            _ => {}
        }
    }

    let branch_resistance = |phase: Phase| {
        samples
            .iter()
            .filter(|s| s.phase == phase && s.i_sw > 0.0)
            .max_by(|a, b| a.v_sw.total_cmp(&b.v_sw))
            .map(|s| s.v_sw / s.i_sw)
    };
    let mut summary = Summary::default();
    if let Some(v) = v_on {
        summary.push("v_switch_on_V", v);
    }
    if let Some(v) = v_off {
        summary.push("v_switch_off_V", v);
    }
    if let Some(r) = branch_resistance(Phase::Insulating) {
        summary.push("r_off_measured_ohm", r);
    }
    if let Some(r) = branch_resistance(Phase::Metallic) {
        summary.push("r_on_measured_ohm", r);
    }

    let trace = Trace {
        neuron_id: neuron.id.clone(),
        samples,
    };
    let events = engine::detect_spikes(&trace);
    Ok(RunArtifact {
        config: doc.clone(),
        traces: vec![trace],
        events,
        summary,
    })
}
