//! Configuration, subcommands and artifact emission for the `lane-emden` binary.

#[cfg(feature = "cli")]
pub mod args;
pub mod config;
pub mod run;

pub use config::{parse_config, RunConfig};
pub use run::{exit_code, run, Command, Verdict, EXIT_CONFIG, EXIT_ERROR, EXIT_OK, EXIT_VERDICT};
