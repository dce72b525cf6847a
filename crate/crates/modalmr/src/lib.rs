//! # modalmr
//!
//! The std side of [`modalmr_core`]: plain-text file formats, a scoped-thread
//! runner for experiment cells, and the `modalmr` command-line tool.
//!
//! Exit codes of the tool: 0 on success, 1 for invalid input (bad flags,
//! files or parameters), 2 for numeric failures inside the solver or the
//! chain analysis.

pub mod cli;
pub mod commands;
pub mod formats;
pub mod parallel;

mod error;

pub use error::CliError;
