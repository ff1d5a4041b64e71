//! Command-line front end: figures as data, WAV analysis, and the
//! offset, gradient and training experiments.

pub mod cli;
pub mod experiments;
pub mod figures;
pub mod output;
pub mod recipes;

pub use cli::{run, Cli, Command, GlobalArgs, EXIT_TONAL};
