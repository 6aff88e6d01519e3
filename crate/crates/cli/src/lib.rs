//! Scenario files and the simulate, fit, score, report and apply stages
//! behind the `avcheck` binary.

pub mod apply;
pub mod config;
pub mod error;
pub mod pipeline;

pub use apply::{apply_model, check_families, write_predictions, ApplyResult, CheckFamily, DatasetPrediction};
pub use config::{Analysis, Scenario, ScenarioConfig};
pub use error::{CliError, Result};
pub use pipeline::{run_pipeline, PipelineRun};
