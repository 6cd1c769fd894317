//! Library side of the `sbm` binary: configuration, commands, artifact output and the acceptance suite.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod range;
pub mod validate;

pub use error::CliError;
