//! Reduced-order simulator for capacitor-free VO2 leaky integrate-and-fire
//! neurons whose membrane potential is the temperature induced at the switch
//! channel by thermal pulses from neighbouring switches.
//!
//! - [`device`]: hysteretic two-branch switch with temperature-dependent
//!   thresholds, switching delays and channel self-heating.
//! - [`circuit`]: series supply/load/switch operating point and stability.
//! - [`thermal`]: delayed, attenuated thermal pulses and their superposition.
//! - [`engine`]: fixed-step network simulation, spike detection, delay sweeps.
//! - [`experiments`]: configuration files, preset scenarios and CSV output.

pub mod circuit;
pub mod device;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod thermal;

pub use error::{Error, Result};
