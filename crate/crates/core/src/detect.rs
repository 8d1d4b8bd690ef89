//! Event detection over Morton code streams.
//!
//! Codes are decoded back into per-cell activation levels. Active frames are
//! grouped into runs that tolerate short inactive gaps, and a run becomes an
//! event when its dominant cell walks across the grid: enough distinct
//! cells, both sides of the centre visited, and no jump wider than allowed.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::features::Variant;
use crate::grid::CELLS;
use crate::zorder::{MortonRecord, Quantizer, ZorderError};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DetectError {
    #[error("invalid detector parameter: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Code(#[from] ZorderError),
    #[error("frame {found} arrived after frame {previous}")]
    UnorderedInput { previous: usize, found: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectParams {
    pub min_distinct_cells: usize,
    pub require_both_sides: bool,
    pub max_cell_jump: usize,
    /// Longest stretch of inactive frames that still joins two active frames
    /// into one run.
    pub gap_tolerance: usize,
    pub min_event_frames: usize,
}

impl Default for DetectParams {
    fn default() -> Self {
        Self {
            min_distinct_cells: 3,
            require_both_sides: true,
            max_cell_jump: 2,
            gap_tolerance: 10,
            min_event_frames: 5,
        }
    }
}

impl DetectParams {
    pub fn validate(&self) -> Result<(), DetectError> {
        if self.min_distinct_cells < 2 {
            return Err(DetectError::InvalidParams("min_distinct_cells must be >= 2".into()));
        }
        if self.max_cell_jump < 1 {
            return Err(DetectError::InvalidParams("max_cell_jump must be >= 1".into()));
        }
        if self.min_event_frames < 1 {
            return Err(DetectError::InvalidParams("min_event_frames must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    LeftToRight,
    RightToLeft,
    Unknown,
}

impl Direction {
    pub fn reversed(self) -> Self {
        match self {
            Direction::LeftToRight => Direction::RightToLeft,
            Direction::RightToLeft => Direction::LeftToRight,
            Direction::Unknown => Direction::Unknown,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::LeftToRight => "left_to_right",
            Direction::RightToLeft => "right_to_left",
            Direction::Unknown => "unknown",
        })
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "left_to_right" => Ok(Direction::LeftToRight),
            "right_to_left" => Ok(Direction::RightToLeft),
            "unknown" => Ok(Direction::Unknown),
            other => Err(format!("unknown direction `{other}`")),
        }
    }
}

/// Decoded activation state of one frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActivationFrame {
    pub frame: usize,
    /// Quantized level per cell; nonzero means active.
    pub levels: [u64; CELLS],
    /// Feature value per cell recovered from the level.
    pub values: [f32; CELLS],
}

impl ActivationFrame {
    /// Builds a frame from a set of 1-based active cells, each at level 1.
    pub fn from_cells(frame: usize, cells: &[usize]) -> Self {
        let mut levels = [0u64; CELLS];
        for &c in cells {
            levels[c - 1] = 1;
        }
        Self {
            frame,
            levels,
            values: levels.map(|l| l as f32),
        }
    }

    pub fn is_active(&self) -> bool {
        self.levels.iter().any(|&l| l > 0)
    }

    /// 1-based indices of active cells.
    pub fn active_cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.levels.iter().enumerate().filter(|(_, &l)| l > 0).map(|(i, _)| i + 1)
    }

    /// The strongest active cell (1-based), lowest index on ties.
    pub fn dominant(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, &l) in self.levels.iter().enumerate() {
            if l > 0 && best.is_none_or(|b| l > self.levels[b]) {
                best = Some(i);
            }
        }
        best.map(|b| b + 1)
    }

    fn peak(&self) -> f32 {
        self.values.iter().copied().fold(0.0, f32::max)
    }
}

pub fn activations_from_codes(
    records: &[MortonRecord],
    quantizer: &Quantizer,
) -> Result<Vec<ActivationFrame>, DetectError> {
    if quantizer.dims() != CELLS {
        return Err(ZorderError::DimensionMismatch {
            expected: CELLS,
            found: quantizer.dims(),
        }
        .into());
    }
    let mut out = Vec::with_capacity(records.len());
    let mut previous: Option<usize> = None;
    for r in records {
        if let Some(p) = previous {
            if r.frame <= p {
                return Err(DetectError::UnorderedInput {
                    previous: p,
                    found: r.frame,
                });
            }
        }
        previous = Some(r.frame);
        let levels = quantizer.decode_levels(r.code)?;
        let values = quantizer.dequantize(&levels)?;
        out.push(ActivationFrame {
            frame: r.frame,
            levels: std::array::from_fn(|i| levels[i]),
            values: std::array::from_fn(|i| values[i] as f32),
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventWindow {
    pub start_frame: usize,
    pub end_frame: usize,
    pub variant: Variant,
    pub direction: Direction,
    pub peak_value: f32,
}

impl EventWindow {
    /// Frames covered, both ends included.
    pub fn frame_count(&self) -> usize {
        self.end_frame - self.start_frame + 1
    }
}

/// Active frames grouped into runs split at long inactive stretches.
fn runs(frames: &[ActivationFrame], gap_tolerance: usize) -> Vec<Vec<&ActivationFrame>> {
    let mut out: Vec<Vec<&ActivationFrame>> = Vec::new();
    for f in frames.iter().filter(|f| f.is_active()) {
        match out.last_mut() {
            Some(run) if f.frame - run.last().unwrap().frame - 1 <= gap_tolerance => run.push(f),
            _ => out.push(vec![f]),
        }
    }
    out
}

/// Dominant cells with consecutive repeats collapsed.
pub fn cell_sequence<'a>(run: impl IntoIterator<Item = &'a ActivationFrame>) -> Vec<usize> {
    let mut seq: Vec<usize> = Vec::new();
    for c in run.into_iter().filter_map(ActivationFrame::dominant) {
        if seq.last() != Some(&c) {
            seq.push(c);
        }
    }
    seq
}

/// Whether a run with this cell sequence and frame span is an event.
pub fn confirms(seq: &[usize], span: usize, params: &DetectParams) -> bool {
    let half = CELLS / 2;
    let both = seq.iter().any(|&c| c <= half) && seq.iter().any(|&c| c > half);
    seq.len() >= params.min_distinct_cells
        && (both || !params.require_both_sides)
        && seq.windows(2).all(|p| p[0].abs_diff(p[1]) <= params.max_cell_jump)
        && span >= params.min_event_frames
}

pub fn detect_events(
    frames: &[ActivationFrame],
    params: &DetectParams,
    variant: Variant,
) -> Vec<EventWindow> {
    debug_assert!(frames.windows(2).all(|p| p[0].frame < p[1].frame));
    runs(frames, params.gap_tolerance)
        .into_iter()
        .filter_map(|run| {
            let (start, end) = (run[0].frame, run[run.len() - 1].frame);
            let seq = cell_sequence(run.iter().copied());
            if !confirms(&seq, end - start + 1, params) {
                return None;
            }
            let (first, last) = (seq[0], seq[seq.len() - 1]);
            let direction = match first.cmp(&last) {
                std::cmp::Ordering::Less => Direction::LeftToRight,
                std::cmp::Ordering::Greater => Direction::RightToLeft,
                std::cmp::Ordering::Equal => Direction::Unknown,
            };
            let peak_value = run.iter().map(|f| f.peak()).fold(0.0, f32::max);
            Some(EventWindow {
                start_frame: start,
                end_frame: end,
                variant,
                direction,
                peak_value,
            })
        })
        .collect()
}
