//! Configuration documents.
//!
//! Documents are TOML with unit-suffixed keys. Unknown keys are rejected and
//! every error names the dotted path of the entry that caused it. Omitted
//! `kernel` and `switch` blocks (or individual keys inside them) take the
//! calibrated defaults, and a parsed document is fully resolved: emitting it
//! writes every value back out.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::device::SwitchParams;
use crate::engine::{NeuronConfig, SimConfig, SweepRoles, Waveform};
use crate::error::{Error, Result};
use crate::thermal::ThermalKernel;

const NS: f64 = 1e-9;
const UM: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub dt_ns: f64,
    pub t_end_ns: f64,
    #[serde(default = "default_ambient")]
    pub ambient_k: f64,
    #[serde(default)]
    pub kernel: KernelDoc,
    #[serde(default)]
    pub switch: SwitchDoc,
    pub neurons: BTreeMap<String, NeuronDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp: Option<RampDoc>,
}

fn default_ambient() -> f64 {
    300.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelDoc {
    pub wave_speed_m_per_s: f64,
    pub decay_length_um: f64,
    pub coupling_gain_k_per_w: f64,
    pub rise_tau_ns: f64,
    pub fall_tau_ns: f64,
}

impl Default for KernelDoc {
    fn default() -> Self {
        // Mirrors `ThermalKernel::default()` in document units.
        Self {
            wave_speed_m_per_s: 6.0,
            decay_length_um: 2.0,
            coupling_gain_k_per_w: 8938.0,
            rise_tau_ns: 500.0,
            fall_tau_ns: 500.0,
        }
    }
}

impl KernelDoc {
    pub fn to_kernel(&self) -> ThermalKernel {
        ThermalKernel {
            wave_speed: self.wave_speed_m_per_s,
            decay_length: self.decay_length_um * UM,
            coupling_gain: self.coupling_gain_k_per_w,
            rise_tau: self.rise_tau_ns * NS,
            fall_tau: self.fall_tau_ns * NS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwitchDoc {
    pub r_off_ohm: f64,
    pub r_on_ohm: f64,
    pub v_th_ref_v: f64,
    pub i_th_ref_a: f64,
    pub v_h_ref_v: f64,
    pub i_h_ref_a: f64,
    pub t_ref_k: f64,
    pub t_transition_k: f64,
    pub halving_interval_k: f64,
    pub tau_on_base_ns: f64,
    pub tau_on_sensitivity_per_v: f64,
    pub tau_off_ns: f64,
    pub thermal_time_constant_ns: f64,
    pub thermal_conductance_w_per_k: f64,
}

impl Default for SwitchDoc {
    fn default() -> Self {
        // Mirrors `SwitchParams::default()` in document units.
        Self {
            r_off_ohm: 57_600.0,
            r_on_ohm: 630.0,
            v_th_ref_v: 5.0,
            i_th_ref_a: 1.3e-4,
            v_h_ref_v: 1.45,
            i_h_ref_a: 1.7e-3,
            t_ref_k: 300.0,
            t_transition_k: 340.0,
            halving_interval_k: 10.0,
            tau_on_base_ns: 100.0,
            tau_on_sensitivity_per_v: 1.235,
            tau_off_ns: 80.0,
            thermal_time_constant_ns: 100.0,
            thermal_conductance_w_per_k: 1e-4,
        }
    }
}

impl SwitchDoc {
    pub fn to_params(&self) -> SwitchParams {
        SwitchParams {
            r_off: self.r_off_ohm,
            r_on: self.r_on_ohm,
            v_th_ref: self.v_th_ref_v,
            i_th_ref: self.i_th_ref_a,
            v_h_ref: self.v_h_ref_v,
            i_h_ref: self.i_h_ref_a,
            t_ref: self.t_ref_k,
            t_transition: self.t_transition_k,
            halving_interval: self.halving_interval_k,
            tau_on_base: self.tau_on_base_ns * NS,
            tau_on_sensitivity: self.tau_on_sensitivity_per_v,
            tau_off: self.tau_off_ns * NS,
            thermal_time_constant: self.thermal_time_constant_ns * NS,
            thermal_conductance: self.thermal_conductance_w_per_k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeuronDoc {
    pub x_um: f64,
    pub y_um: f64,
    pub r_s_ohm: f64,
    pub drive: DriveDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch: Option<SwitchDoc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveKind {
    Constant,
    Pulse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveDoc {
    pub kind: DriveKind,
    pub level_v: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulse_start_ns: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulse_duration_ns: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_v: Option<f64>,
}

impl DriveDoc {
    pub fn constant(level_v: f64) -> Self {
        Self {
            kind: DriveKind::Constant,
            level_v,
            pulse_start_ns: None,
            pulse_duration_ns: None,
            baseline_v: None,
        }
    }

    pub fn pulse(level_v: f64, start_ns: f64, duration_ns: f64) -> Self {
        Self {
            kind: DriveKind::Pulse,
            level_v,
            pulse_start_ns: Some(start_ns),
            pulse_duration_ns: Some(duration_ns),
            baseline_v: Some(0.0),
        }
    }

    fn to_waveform(&self, key: &str) -> Result<Waveform> {
        Ok(match self.kind {
            DriveKind::Constant => {
                for (name, present) in [
                    ("pulse_start_ns", self.pulse_start_ns.is_some()),
                    ("pulse_duration_ns", self.pulse_duration_ns.is_some()),
                    ("baseline_v", self.baseline_v.is_some()),
                ] {
                    if present {
                        return Err(Error::config(
                            format!("{key}.{name}"),
                            "only valid for kind = \"pulse\"",
                        ));
                    }
                }
                Waveform::Constant { level: self.level_v }
            }
            DriveKind::Pulse => Waveform::Pulse {
                level: self.level_v,
                start: self.pulse_start_ns.unwrap_or(0.0) * NS,
                duration: self
                    .pulse_duration_ns
                    .ok_or_else(|| Error::config(format!("{key}.pulse_duration_ns"), "required for pulse drives"))?
                    * NS,
                baseline: self.baseline_v.unwrap_or(0.0),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepDoc {
    pub emitter_a: String,
    pub emitter_b: String,
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_start_ns: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_end_ns: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_step_ns: Option<f64>,
}

impl SweepDoc {
    pub fn roles(&self) -> SweepRoles {
        SweepRoles {
            emitter_a: self.emitter_a.clone(),
            emitter_b: self.emitter_b.clone(),
            target: self.target.clone(),
        }
    }
}

/// Quasi-static supply ramp used for I-V characteristics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RampDoc {
    pub v_max_v: f64,
    pub step_mv: f64,
    pub slew_v_per_s: f64,
}

/// Inclusive grid `start, start + step, ..., end` in nanoseconds, returned in seconds.
pub fn delay_grid(start_ns: f64, end_ns: f64, step_ns: f64) -> Result<Vec<f64>> {
    if !(step_ns > 0.0 && step_ns.is_finite()) {
        return Err(Error::config("sweep.dt_step_ns", format!("must be > 0, got {step_ns}")));
    }
    if !(start_ns.is_finite() && end_ns.is_finite() && end_ns >= start_ns) {
        return Err(Error::config("sweep.dt_end_ns", "must be finite and >= dt_start_ns"));
    }
    let n = ((end_ns - start_ns) / step_ns + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| (start_ns + k as f64 * step_ns) * NS).collect())
}

impl ConfigDocument {
    pub fn to_sim_config(&self) -> Result<SimConfig> {
        let check = |key: &str, value: f64| {
            if value.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be finite, got {value}")))
            }
        };
        check("dt_ns", self.dt_ns)?;
        check("t_end_ns", self.t_end_ns)?;
        check("ambient_k", self.ambient_k)?;
        if !(self.dt_ns > 0.0) {
            return Err(Error::config("dt_ns", format!("must satisfy 0 < dt, got {}", self.dt_ns)));
        }
        if !(self.t_end_ns >= self.dt_ns) {
            return Err(Error::config(
                "t_end_ns",
                format!("must satisfy dt_ns <= t_end_ns, got {} < {}", self.t_end_ns, self.dt_ns),
            ));
        }
        if !(self.ambient_k > 0.0) {
            return Err(Error::config("ambient_k", format!("must be > 0 K, got {}", self.ambient_k)));
        }
        let kernel = self.kernel.to_kernel();
        kernel.validate().map_err(|e| Error::config("kernel", e.to_string()))?;
        let switch_params = self.switch.to_params();
        switch_params
            .validate()
            .map_err(|e| Error::config("switch", e.to_string()))?;

        let mut neurons = Vec::with_capacity(self.neurons.len());
        for (id, n) in &self.neurons {
            let key = format!("neurons.{id}");
            if !(n.r_s_ohm > 0.0 && n.r_s_ohm.is_finite()) {
                return Err(Error::config(format!("{key}.r_s_ohm"), format!("must be > 0, got {}", n.r_s_ohm)));
            }
            let params = match &n.switch {
                Some(doc) => {
                    let p = doc.to_params();
                    p.validate().map_err(|e| Error::config(format!("{key}.switch"), e.to_string()))?;
                    Some(p)
                }
                None => None,
            };
            neurons.push(NeuronConfig {
                id: id.clone(),
                position: (n.x_um * UM, n.y_um * UM),
                r_s: n.r_s_ohm,
                drive: n.drive.to_waveform(&format!("{key}.drive"))?,
                switch_params: params,
            });
        }

        if let Some(sweep) = &self.sweep {
            for (field, id) in [
                ("emitter_a", &sweep.emitter_a),
                ("emitter_b", &sweep.emitter_b),
                ("target", &sweep.target),
            ] {
                if !self.neurons.contains_key(id) {
                    return Err(Error::config(format!("sweep.{field}"), format!("unknown neuron `{id}`")));
                }
            }
        }

        let config = SimConfig {
            dt: self.dt_ns * NS,
            t_end: self.t_end_ns * NS,
            ambient: self.ambient_k,
            neurons,
            kernel,
            switch_params,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration documents always serialize")
    }

    /// Set a dotted `key` to `value`, then re-validate the whole document.
    ///
    /// `value` is read as a TOML literal, falling back to a bare string.
    pub fn with_override(&self, key: &str, value: &str) -> Result<Self> {
        let mut root = toml::Value::try_from(self).expect("configuration documents always serialize");
        let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));

        let mut node = &mut root;
        let parts: Vec<&str> = key.split('.').collect();
        let (last, path) = parts.split_last().expect("split yields at least one part");
        for part in path {
            let table = node
                .as_table_mut()
                .ok_or_else(|| Error::config(key, format!("`{part}` is not inside a table")))?;
            node = table
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        }
        node.as_table_mut()
            .ok_or_else(|| Error::config(key, "parent is not a table"))?
            .insert(last.to_string(), parsed);

        let text = toml::to_string(&root).expect("a TOML value always serializes");
        parse_document(&text)
    }
}

/// Parse and strictly validate a document without converting it.
pub fn parse_document(text: &str) -> Result<ConfigDocument> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::config("<document>", e.to_string().trim_end().to_string()))?;
    let doc: ConfigDocument = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let key = if path == "." { "<document>".to_string() } else { path };
        Error::config(key, e.into_inner().to_string().trim_end().to_string())
    })?;
    doc.to_sim_config()?;
    Ok(doc)
}

pub fn parse_config(text: &str) -> Result<SimConfig> {
    parse_document(text)?.to_sim_config()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
dt_ns = 1.0
t_end_ns = 100.0

[neurons.n1]
x_um = 0.0
y_um = 0.0
r_s_ohm = 1000.0
drive.kind = "pulse"
drive.level_v = 6.0
drive.pulse_start_ns = 10.0
drive.pulse_duration_ns = 50.0
"#;

    #[test]
    fn defaults_fill_omitted_blocks() {
        let doc = parse_document(MINIMAL).unwrap();
        assert_eq!(doc.kernel, KernelDoc::default());
        assert_eq!(doc.switch, SwitchDoc::default());
        let config = doc.to_sim_config().unwrap();
        assert_eq!(config.ambient, 300.0);
        assert_eq!(config.neurons.len(), 1);
        assert!(matches!(config.neurons[0].drive, Waveform::Pulse { level, .. } if level == 6.0));
        let text = doc.to_toml();
        assert!(text.contains("coupling_gain_k_per_w"));
        assert_eq!(parse_document(&text).unwrap(), doc);
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs()
    }

    #[test]
    fn document_defaults_match_model_defaults() {
        let k = KernelDoc::default().to_kernel();
        let d = ThermalKernel::default();
        assert!(close(k.wave_speed, d.wave_speed) && close(k.decay_length, d.decay_length));
        assert!(close(k.coupling_gain, d.coupling_gain) && close(k.rise_tau, d.rise_tau));
        assert!(close(k.fall_tau, d.fall_tau));

        let p = SwitchDoc::default().to_params();
        let d = SwitchParams::default();
        let pairs = [
            (p.r_off, d.r_off),
            (p.r_on, d.r_on),
            (p.v_th_ref, d.v_th_ref),
            (p.i_th_ref, d.i_th_ref),
            (p.v_h_ref, d.v_h_ref),
            (p.i_h_ref, d.i_h_ref),
            (p.t_ref, d.t_ref),
            (p.t_transition, d.t_transition),
            (p.halving_interval, d.halving_interval),
            (p.tau_on_base, d.tau_on_base),
            (p.tau_on_sensitivity, d.tau_on_sensitivity),
            (p.tau_off, d.tau_off),
            (p.thermal_time_constant, d.thermal_time_constant),
            (p.thermal_conductance, d.thermal_conductance),
        ];
        assert!(pairs.iter().all(|&(a, b)| close(a, b)), "{pairs:?}");
    }

    #[test]
    fn zero_dt_names_the_key() {
        let err = parse_config(&MINIMAL.replace("dt_ns = 1.0", "dt_ns = 0.0")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("dt_ns") && msg.contains("0 < dt"), "{msg}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        let err = parse_config(&MINIMAL.replace("r_s_ohm", "r_s_kohm")).unwrap_err();
        match err {
            Error::Config { key, .. } => assert!(key.starts_with("neurons.n1"), "{key}"),
            other => panic!("{other}"),
        }
        let err = parse_config(&format!("{MINIMAL}\n[kernel]\nwave_speed = 6.0\n")).unwrap_err();
        assert!(err.to_string().contains("kernel"), "{err}");
    }

    #[test]
    fn malformed_document() {
        assert!(matches!(parse_config("dt_ns = = 1"), Err(Error::Config { .. })));
    }

    #[test]
    fn pulse_requires_duration() {
        let err = parse_config(&MINIMAL.replace("drive.pulse_duration_ns = 50.0", "")).unwrap_err();
        assert!(err.to_string().contains("neurons.n1.drive.pulse_duration_ns"), "{err}");
    }

    #[test]
    fn overrides_are_strict() {
        let doc = parse_document(MINIMAL).unwrap();
        let doc2 = doc.with_override("neurons.n1.r_s_ohm", "500").unwrap();
        assert_eq!(doc2.neurons["n1"].r_s_ohm, 500.0);
        let doc3 = doc.with_override("neurons.n1.drive.kind", "constant");
        // pulse-only keys remain, so switching the kind is rejected
        assert!(doc3.is_err());
        assert!(doc.with_override("kernel.speed", "1").is_err());
        assert!(doc.with_override("dt_ns", "-1").is_err());
    }

    #[test]
    fn grid_is_inclusive() {
        let g = delay_grid(-500.0, 280.0, 20.0).unwrap();
        assert_eq!(g.len(), 40);
        assert!((g[0] + 500e-9).abs() < 1e-18);
        assert!((g[39] - 280e-9).abs() < 1e-18);
        assert!(delay_grid(0.0, 1.0, 0.0).is_err());
        assert!(delay_grid(1.0, 0.0, 1.0).is_err());
    }
}
