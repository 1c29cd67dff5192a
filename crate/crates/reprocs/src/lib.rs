//! File formats, presets, Monte-Carlo runner and command-line front end for
//! `reprocs-core`.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod frames;
pub mod presets;
pub mod report;
pub mod runner;

pub use config::Config;
pub use error::CliError;
pub use presets::{preset, Scale, PRESETS};
