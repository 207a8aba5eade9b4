//! Configuration, scenario orchestration and file outputs.

pub mod config;
pub mod output;
pub mod scenario;

pub use config::{load_config, parse_config, RunConfig, Scenario};
pub use output::{write_outputs, Manifest};
pub use scenario::{run_scenario, ScenarioResult};
