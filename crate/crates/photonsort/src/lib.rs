//! Command line, file formats and parallel drivers for `photonsort-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod parallel;

pub use config::RunConfig;
pub use error::{AppError, AppResult};
