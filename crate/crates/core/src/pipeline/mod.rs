//! End-to-end orchestration: configuration, the streaming per-scenario
//! runner, batch runs and stripe plots.

mod config;
mod run;
pub mod stages;
mod stripes;

pub use config::{apply_override, ConfigError, PipelineConfig, QuantizerConfig, ScenarioInput};
pub use run::{
    load_scenario, read_frame_input, run_pipeline, run_scenario, write_scenario, PipelineError, RunSummary,
    ScenarioData, ScenarioOutput,
};
pub use stages::{StageError, StageTimes};
pub use stripes::{emit_stripes, StripeFormat, StripeOptions};
