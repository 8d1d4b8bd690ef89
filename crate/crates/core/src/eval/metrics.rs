use std::collections::{BTreeMap, BTreeSet};

use crate::detect::EventWindow;
use crate::features::Variant;
use crate::media_io::GroundTruthEvent;

use super::EvalError;

/// Intersection over union of two inclusive frame intervals.
pub fn temporal_iou(a: (i64, i64), b: (i64, i64)) -> f64 {
    let inter = (a.1.min(b.1) - a.0.max(b.0) + 1).max(0);
    if inter == 0 {
        return 0.0;
    }
    let union = (a.1 - a.0 + 1) + (b.1 - b.0 + 1) - inter;
    inter as f64 / union as f64
}

/// Frames per second of wall-clock processing.
pub fn throughput(frame_count: usize, elapsed_secs: f64) -> Result<f64, EvalError> {
    if frame_count == 0 || elapsed_secs.is_nan() || elapsed_secs <= 0.0 {
        return Err(EvalError::InvalidTiming {
            frames: frame_count,
            elapsed: elapsed_secs,
        });
    }
    Ok(frame_count as f64 / elapsed_secs)
}

/// Scenario-level detection scores.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub variant: Variant,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub sensitivity: f64,
    pub specificity: f64,
    pub f1: f64,
    /// Mean best IoU over true-positive scenarios.
    pub mean_iou: f64,
    /// Absent when timing was not measured.
    pub fps: Option<f64>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Scores predicted events against one ground-truth row per scenario.
///
/// A positive scenario is a hit when some prediction overlaps its window with
/// IoU at least `iou_threshold`; a negative scenario is a false alarm when it
/// has any prediction at all.
pub fn match_and_score(
    variant: Variant,
    predicted: &BTreeMap<String, Vec<EventWindow>>,
    truth: &[GroundTruthEvent],
    iou_threshold: f64,
) -> Result<MetricsReport, EvalError> {
    let mut by_id: BTreeMap<&str, &GroundTruthEvent> = BTreeMap::new();
    for t in truth {
        if by_id.insert(&t.scenario_id, t).is_some() {
            return Err(EvalError::DuplicateScenario(t.scenario_id.clone()));
        }
    }
    let known: BTreeSet<&str> = by_id.keys().copied().collect();
    if let Some(id) = predicted.keys().find(|id| !known.contains(id.as_str())) {
        return Err(EvalError::UnknownScenario(id.clone()));
    }

    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    let mut iou_sum = 0.0;
    for (id, gt) in &by_id {
        let events = predicted.get(*id).map(Vec::as_slice).unwrap_or(&[]);
        match gt.window() {
            Some(window) => {
                let best = events
                    .iter()
                    .map(|e| temporal_iou(window, (e.start_frame as i64, e.end_frame as i64)))
                    .fold(0.0, f64::max);
                if !events.is_empty() && best >= iou_threshold {
                    tp += 1;
                    iou_sum += best;
                } else {
                    fn_ += 1;
                }
            }
            None if events.is_empty() => tn += 1,
            None => fp += 1,
        }
    }
    Ok(MetricsReport {
        variant,
        tp,
        fp,
        tn,
        fn_,
        sensitivity: ratio(tp, tp + fn_),
        specificity: ratio(tn, tn + fp),
        f1: ratio(2 * tp, 2 * tp + fp + fn_),
        mean_iou: if tp == 0 { 0.0 } else { iou_sum / tp as f64 },
        fps: None,
    })
}
