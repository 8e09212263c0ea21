//! Configuration, presets and run orchestration behind the `cavity-ef`
//! binary.

pub mod config;
pub mod error;
pub mod output;
pub mod presets;
pub mod run;

pub use config::RunConfig;
pub use error::{Result, RunError};
pub use run::{run, RunSummary};
