//! Command-line front end for the TGV library: graymap I/O, evaluation and
//! restoration commands, a numerical verification suite, and a shape
//! benchmark.

pub mod bench;
pub mod commands;
pub mod pgm;
pub mod verify;

pub use commands::{Cli, CliError, Command};
