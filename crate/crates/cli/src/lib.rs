//! Configuration, expression fields and the experiment runner behind the
//! `mixop` binary.

pub mod config;
pub mod error;
pub mod expr;
pub mod runner;

pub use config::{ExperimentConfig, Kind};
pub use error::{exit, CliError};
pub use expr::{Expr, ExprError};
pub use runner::{run_bytes, run_file, Outcome, RunOptions};
