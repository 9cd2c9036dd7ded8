//! Behavioral simulator for Hebbian learning and associative recall on a
//! 1T1R phase-change-memory synapse array.
//!
//! - [`device`]: single-cell gradual SET / RESET / read model and pulse energy
//! - [`crossbar`]: N x N array semantics, initialization to a target spread, statistics
//! - [`network`]: integrate-and-fire neurons, the per-iteration Hebbian protocol, recall probes
//! - [`experiments`]: learn-then-recall runs, variation sweeps, weight contrast, histograms
//! - [`artifacts`]: JSON / CSV readers and writers

pub mod artifacts;
pub mod crossbar;
pub mod device;
pub mod error;
pub mod experiments;
pub mod network;
pub mod rng;

pub use crossbar::{ArrayStats, CrossbarArray, InitScheme, InitVariant, NeuronSet};
pub use device::{pulse_energy, read_current, DeviceParams, PcmCell, PulseRole, PulseSpec};
pub use error::{SimError, SimResult};
pub use experiments::{
    distribution_history, gradual_set_curve, learn_and_recall, variation_sweep, weight_contrast,
    ExperimentConfig, RunReport, SweepRow,
};
pub use network::{
    compute_thresholds, recall_probe, recall_success, training_epoch, EpochTrace, NeuronState,
    Pattern, ProtocolParams,
};
