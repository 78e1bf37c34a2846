//! Command-line driver: flat `section.key = value` configs, study
//! orchestration, CSV output and the exit-code contract
//! (0 ok, 1 config, 2 numerical failure, 3 threshold failure).

mod config;
mod run;

pub use config::{
    parse_config, parse_config_with, CheckSpec, Command, ConfigError, ConfigErrors, InitialData, LameSpec, MmsSpec, RunConfig,
    StepperSpec,
};
pub use run::{initial_state, random_spec, run, with_overrides, RunOutcome, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, EXIT_THRESHOLD};
