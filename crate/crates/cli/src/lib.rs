//! Command-line front end: configuration, record formats and subcommands.
//!
//! Exit codes: 0 ok, 1 other I/O failure, 2 degenerate geometry, 3 no
//! boundary line, 4 parse or config error, 5 no pallet evidence.

pub mod commands;
pub mod config;
pub mod fsio;
pub mod records;

pub use config::PipelineConfig;
pub use records::{DetectionsFile, PoseRecord, TruthFile};
