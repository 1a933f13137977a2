use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use vo2_lif::experiments::config::{delay_grid, parse_document};
use vo2_lif::experiments::presets::{run_sweep, PresetName};
use vo2_lif::experiments::{emit_csv, run_document, run_scenario, RunArtifact, ScenarioPreset};
use vo2_lif::Error;

/// Simulate thermally coupled VO2 leaky integrate-and-fire neurons.
#[derive(Debug, Parser)]
#[command(name = "vo2lif", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the scenario described by a configuration file.
    Simulate {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a built-in scenario.
    Preset {
        /// One of: iv_curve, fig4a_subthreshold, fig4b_fire, fig4c_summation, fig5_sweep, oscillation
        name: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override a configuration entry, e.g. `--set neurons.n3.drive.level_v=1.7`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Sweep the delay between the two emitters named in the file's `sweep` block.
    Sweep {
        config: PathBuf,
        #[arg(long, allow_hyphen_values = true, value_name = "NS")]
        dt_start: f64,
        #[arg(long, allow_hyphen_values = true, value_name = "NS")]
        dt_end: f64,
        #[arg(long, value_name = "NS")]
        dt_step: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn execute(command: Command) -> Result<(RunArtifact, PathBuf), Error> {
    match command {
        Command::Simulate { config, out } => {
            let doc = parse_document(&read(&config)?)?;
            Ok((run_document(&doc)?, out))
        }
        Command::Preset { name, out, set } => {
            let mut preset = ScenarioPreset::new(name.parse::<PresetName>()?);
            for entry in set {
                let (k, v) = entry
                    .split_once('=')
                    .ok_or_else(|| Error::Config {
                        key: entry.clone(),
                        message: "expected KEY=VALUE".into(),
                    })?;
                preset.overrides.push((k.trim().to_string(), v.trim().to_string()));
            }
            Ok((run_scenario(&preset)?, out))
        }
        Command::Sweep {
            config,
            dt_start,
            dt_end,
            dt_step,
            out,
        } => {
            let mut doc = parse_document(&read(&config)?)?;
            let sweep = doc.sweep.as_mut().ok_or_else(|| Error::Config {
                key: "sweep".into(),
                message: "a sweep needs emitter_a, emitter_b and target".into(),
            })?;
            sweep.dt_start_ns = Some(dt_start);
            sweep.dt_end_ns = Some(dt_end);
            sweep.dt_step_ns = Some(dt_step);
            let sweep = sweep.clone();
            let offsets = delay_grid(dt_start, dt_end, dt_step)?;
            let sim = doc.to_sim_config()?;
            Ok((run_sweep(&doc, &sim, &sweep, &offsets)?, out))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = execute(cli.command).and_then(|(artifact, out)| {
        emit_csv(&artifact, &out)?;
        Ok((artifact, out))
    });
    match result {
        Ok((artifact, out)) => {
            for (k, v) in &artifact.summary.scalars {
                println!("{k} = {v:.6e}");
            }
            for p in &artifact.summary.sweep {
                println!("dt = {:+.1} ns  peak = {:.4e} A  fired = {}", p.delta_t * 1e9, p.peak_current, p.fired);
            }
            println!("wrote {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
