//! Configuration, orchestration and output for the `ringbump` binary.

pub mod commands;
pub mod config;
pub mod output;
pub mod sampling;

pub use commands::{run, Command, Options, Outcome};
pub use config::{parse_config, RunConfig};
