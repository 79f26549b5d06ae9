//! Experiment runner behind the `nbmf` command-line tool.

mod config;
mod runner;

pub use config::{is_known_key, preset, DatasetSource, EmitFlags, RunConfig, Settings};
pub use runner::*;
