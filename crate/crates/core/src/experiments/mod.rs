//! Scenario presets, configuration documents and CSV artifacts.

pub mod config;
pub mod output;
pub mod presets;

pub use config::{parse_config, parse_document, ConfigDocument};
pub use output::emit_csv;
pub use presets::{run_document, run_scenario, PresetName, RunArtifact, ScenarioPreset, Summary};
