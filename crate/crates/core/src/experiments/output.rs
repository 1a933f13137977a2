//! CSV artifacts.
//!
//! Every file starts with a `# schema: ...` comment line naming its layout
//! version, followed by a header row. Numbers are written in scientific
//! notation with a fixed number of digits so identical runs give identical
//! bytes.
//!
//! | file | columns |
//! |------|---------|
//! | `trace_<id>.csv` | `t_s,v_sw_V,i_sw_A,t_ch_K,t_p_K` |
//! | `events.csv` | `neuron_id,t_onset_s,t_offset_s,peak_current_A` |
//! | `summary.csv` (single runs) | `quantity,value` |
//! | `summary.csv` (delay sweeps) | `delta_t_s,target_peak_current_A,fired` |
//! | `window.csv` (delay sweeps) | `quantity,value` |
//! | `config.toml` | resolved configuration snapshot |

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::presets::RunArtifact;
use crate::engine::{SpikeEvent, SweepPoint, Trace};
use crate::error::{Error, Result};

pub const TRACE_HEADER: &str = "t_s,v_sw_V,i_sw_A,t_ch_K,t_p_K";
pub const EVENTS_HEADER: &str = "neuron_id,t_onset_s,t_offset_s,peak_current_A";
pub const SCALAR_HEADER: &str = "quantity,value";
pub const SWEEP_HEADER: &str = "delta_t_s,target_peak_current_A,fired";

const SCHEMA_VERSION: u32 = 1;

fn num(x: f64) -> String {
    format!("{x:.12e}")
}

fn preamble(kind: &str, header: &str) -> String {
    format!("# schema: vo2lif-{kind}/{SCHEMA_VERSION}\n{header}\n")
}

pub fn trace_csv(trace: &Trace) -> String {
    let mut out = preamble("trace", TRACE_HEADER);
    for s in &trace.samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            num(s.t),
            num(s.v_sw),
            num(s.i_sw),
            num(s.channel_temp),
            num(s.t_p)
        );
    }
    out
}

pub fn events_csv(events: &[SpikeEvent]) -> String {
    let mut out = preamble("events", EVENTS_HEADER);
    for e in events {
        let offset = e.t_offset.map(num).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{}", e.neuron_id, num(e.t_onset), offset, num(e.peak_current));
    }
    out
}

pub fn scalars_csv(scalars: &[(String, f64)]) -> String {
    let mut out = preamble("summary", SCALAR_HEADER);
    for (k, v) in scalars {
        let _ = writeln!(out, "{k},{}", num(*v));
    }
    out
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = preamble("sweep", SWEEP_HEADER);
    for p in points {
        let _ = writeln!(out, "{},{},{}", num(p.delta_t), num(p.peak_current), u8::from(p.fired));
    }
    out
}

/// All files for `artifact`, as `(file name, contents)` in write order.
pub fn render(artifact: &RunArtifact) -> Vec<(String, String)> {
    let mut files = vec![("config.toml".to_string(), artifact.config.to_toml())];
    for trace in &artifact.traces {
        files.push((format!("trace_{}.csv", trace.neuron_id), trace_csv(trace)));
    }
    files.push(("events.csv".into(), events_csv(&artifact.events)));
    if artifact.summary.sweep.is_empty() {
        files.push(("summary.csv".into(), scalars_csv(&artifact.summary.scalars)));
    } else {
        files.push(("summary.csv".into(), sweep_csv(&artifact.summary.sweep)));
        files.push(("window.csv".into(), scalars_csv(&artifact.summary.scalars)));
    }
    files
}

/// Write every artifact file into `destination`, creating it if needed.
pub fn emit_csv(artifact: &RunArtifact, destination: &Path) -> Result<()> {
    fs::create_dir_all(destination).map_err(|e| Error::io(destination, e))?;
    for (name, contents) in render(artifact) {
        let path = destination.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
