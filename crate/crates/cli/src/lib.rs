//! Configuration, experiment runner and artifact ledger for the `hotlink`
//! command-line tool.

pub mod config;
mod error;
pub mod experiments;
pub mod ledger;
pub mod output;
pub mod reproduce;

pub use config::{load_config, ExperimentConfig};
pub use error::CliError;
pub use experiments::{run_experiment, Experiment};
pub use ledger::{Ledger, LedgerEntry};
pub use reproduce::{reproduce_figure, Figure};
