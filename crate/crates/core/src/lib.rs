//! Simulator of a battery-less LoRaWAN Class A end device that runs from a
//! capacitor charged by an energy harvester, with EU868 duty-cycle rules
//! and a family of energy-aware packet schedulers.
//!
//! The usual entry point is [`run_scenario`] with a [`ScenarioConfig`];
//! [`sweep`] runs many scenarios in parallel.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod device;
pub mod energy;
pub mod engine;
pub mod error;
pub mod mac;
pub mod metrics;
pub mod scheduler;
pub mod trace;

pub use config::{Assignments, ScenarioConfig, TraceSource};
pub use device::DeviceState;
pub use engine::{
    gateway_respond, run_scenario, simulate, sweep, sweep_runs, DropReason, EventKind, EventLog, LogRecord,
};
pub use error::{Error, Result};
pub use mac::{time_on_air, AckWindow, RadioParams, Traffic, TxCycleSpec};
pub use metrics::MetricsReport;
pub use scheduler::{Decision, Policy};
pub use trace::HarvestTrace;
