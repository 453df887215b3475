//! Configuration, presets, file formats and subcommand dispatch for the
//! `contlab` command line.

pub mod config;
pub mod io;
pub mod presets;
pub mod run;

pub use config::Config;
pub use run::{execute, Outcome, Subcommand};
