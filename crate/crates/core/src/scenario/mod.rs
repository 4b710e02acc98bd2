//! Scenario configuration, reference and demand signals, and the
//! closed-loop run.

mod config;
pub mod fixtures;
mod run;
mod signals;

pub use config::*;
pub use run::{run, run_many, run_mode, RunMeta, RunRecord};
pub use signals::{demand_at, reference_at, DemandSource, ReferenceSpec, Series};
