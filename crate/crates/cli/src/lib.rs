//! Batch command-line front end for [`iontrap`].
//!
//! A run is described by a TOML file whose keys carry their units
//! (`freq_mhz`, `d_um`, `t_probe_us`, ...); [`config::parse_config`] turns it
//! into SI values and rejects anything out of range, naming the key and
//! line. [`commands::execute`] runs one subcommand and writes its tables.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 runtime error,
//! 4 fit failure.

pub mod commands;
pub mod config;

pub use commands::{execute, Cli, CliError, Command, Flags, Format, Report};
pub use config::{parse_config, parse_config_str, ConfigError, RunConfig};
