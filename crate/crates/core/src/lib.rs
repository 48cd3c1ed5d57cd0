//! Simulator of a phase-change-memory crossbar used as the synaptic array of
//! a 10-neuron Hopfield network trained with Hebbian gradual-SET updates.
//!
//! Layers, bottom up: [`device`] (one stochastic PCM cell), [`crossbar`]
//! (wordline/bitline array), [`hopfield`] (threshold, epochs, two-pattern
//! protocol), [`metrics`] (energy, sweeps, read-voltage sensitivity) and
//! [`harness`] (characterization, calibration, figure data).

pub mod config;
pub mod crossbar;
pub mod device;
pub mod error;
pub mod exec;
pub mod harness;
pub mod hopfield;
pub mod metrics;
pub mod rng;
pub mod scenario;

pub use config::RunConfig;
pub use crossbar::{ArrayGeometry, CrossbarState};
pub use device::{CellState, DeviceParams, Pulse, VariationSpec};
pub use error::{Error, Result};
pub use exec::Execution;
pub use hopfield::{LearningTrace, NetworkConfig, Pattern};
pub use scenario::Scenario;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
