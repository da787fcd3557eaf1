//! Experiment harness for the compressible liquid-crystal flow kernel:
//! configuration parsing, experiment presets, and the CSV/JSON artifact
//! formats behind the `leslie-flow` binary.

pub mod config;
pub mod experiment;
pub mod series;
pub mod summary;

pub use config::{parse_config, ConfigError, Experiment, InitKind, RefineTarget, RunConfig};
pub use experiment::{run_experiment, thread_cap_from_env, ExperimentResult};
pub use summary::exit_code;
