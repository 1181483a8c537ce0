//! Scenario runner for the reduced groupoid Ricci flow: TOML configs and
//! built-in presets in, JSON/CSV/human reports out.

pub mod config;
pub mod report;
pub mod runner;

pub use config::{preset, ScenarioConfig, Suite, PRESET_NAMES, SCHEMA_VERSION};
pub use report::{emit_report, Format, Location, RunReport, SuiteReport};
pub use runner::{run_scenario, RunOptions};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("usage: {0}")]
    Usage(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Flow(#[from] groupoid_ricci::flow::FlowError),
    #[error(transparent)]
    Geometry(#[from] groupoid_ricci::GeometryError),
}
