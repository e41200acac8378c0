//! Files in and out: scenario matrices, run configs, synthetic scenarios
//! and path tables.

pub mod config;
pub mod generator;
pub mod path_output;
pub mod scenario_file;

pub use config::{read_run_config, RunConfig};
pub use generator::{generate, GeneratorSpec};
pub use path_output::{write_convergence, write_path, write_weights};
pub use scenario_file::{read_scenarios, write_scenarios, ScenarioFile};
