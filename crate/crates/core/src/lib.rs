//! Discrete-event wireless sensor network simulator with a per-node energy
//! ledger split by constituent (Individual, Local, Global, Sink, Environment).
//!
//! The usual entry points are [`config::load_config`], [`sim::run`] and the
//! batch helpers in [`experiment`].

pub mod config;
pub mod energy;
pub mod experiment;
pub mod network;
pub mod node;
pub mod output;
pub mod routing;
pub mod sim;

pub use config::{load_config, ConfigError, PolicyKind, SimConfig};
pub use energy::{Constituent, EnergyLedger, EnergyParams, PowerState, SubCategory, UnitKind};
pub use experiment::{compare_policies, sweep, CompareReport, SweepOutcome, SweepParam, SweepSpec};
pub use node::NodeId;
pub use sim::{run, SimError, SimResult, Simulation};
