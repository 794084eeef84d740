//! Config parsing, command dispatch and record output for the `condenser`
//! binary.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{run, Command, Output};
pub use config::{Problem, ProblemConfig};
pub use output::{write_records, Format};
