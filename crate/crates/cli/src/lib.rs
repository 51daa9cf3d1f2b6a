//! Command-line front end: config parsing, experiment orchestration and
//! deterministic result files.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "FOCKPROBE_OUT_DIR";
