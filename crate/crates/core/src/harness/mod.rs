//! Batch front door: configuration, scenario assembly, persistence and the
//! validation suite.

pub mod config;
pub mod output;
pub mod scenario;

pub use config::{load_config, parse_config, RunConfig};
pub use output::{noise_dump, run_scenario, sweep_epsilon};
pub use scenario::ScenarioSetup;
#[cfg(feature = "validation")]
pub mod validation;
