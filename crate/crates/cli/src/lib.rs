//! Configuration, orchestration and output for the `sbp-elastic` command line.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod run;
pub mod snapshot;

pub use config::{parse_config, RunConfig};
pub use error::{CliError, Result};
pub use run::run;
