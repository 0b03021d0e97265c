//! File formats, reports and command implementations behind the `wrapkit`
//! binary.

pub mod commands;
pub mod image_io;
pub mod ply;
pub mod report;

pub use commands::{CliError, ExitCode};
