//! Command-line front end for `dissim-core`: problem documents in, JSON
//! reports and CSV sweeps out.

pub mod commands;
pub mod document;
pub mod output;

pub use commands::{CliError, CriteriaFlags, Output, Settings, Status};
pub use document::{load, parse, DocError, Document, Problem};
