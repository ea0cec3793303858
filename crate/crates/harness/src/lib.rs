//! Scenario configuration, orchestration and artifact emission for the
//! livsic numerical lab.

pub mod config;
pub mod emit;
pub mod run;

pub use config::{
    emit_config, parse_config, ConfigError, ConfigErrors, Experiment, ScenarioConfig, Tolerances,
};
pub use emit::{emit_tables, validate_summary, write_error};
pub use run::{run_scenario, RunError, RunResult, Status, Verdict};
