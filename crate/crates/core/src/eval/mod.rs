//! Scoring detections against ground truth, and synthetic scenes for
//! checking the whole pipeline without external data.

mod metrics;
pub mod synth;

pub use metrics::{match_and_score, temporal_iou, throughput, MetricsReport};
pub use synth::{crossing_frame_count, crossing_window, generate_crossing, generate_static, generate_vertical_mover, StartSide, SyntheticScenario};

/// Default minimum IoU for a prediction to count as a hit.
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.1;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("prediction for unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("scenario `{0}` appears more than once in the ground truth")]
    DuplicateScenario(String),
    #[error("cannot compute throughput from {frames} frames in {elapsed} s")]
    InvalidTiming { frames: usize, elapsed: f64 },
    #[error("invalid scene geometry: {0}")]
    Geometry(String),
}
