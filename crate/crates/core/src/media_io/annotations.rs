//! Ground-truth annotation CSV: `scenario_id,start_frame,end_frame,label`.
//!
//! An event starts when the pedestrian steps onto the road and ends when they
//! leave it or the clip ends. Scenarios without a crossing use label `none`
//! and `-1,-1` as frame bounds.

use std::fs;
use std::path::Path;

use super::MediaError;

pub const NONE_LABEL: &str = "none";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundTruthEvent {
    pub scenario_id: String,
    pub start_frame: i64,
    pub end_frame: i64,
    pub label: String,
}

impl GroundTruthEvent {
    pub fn is_positive(&self) -> bool {
        self.label != NONE_LABEL
    }

    pub fn none(scenario_id: impl Into<String>) -> Self {
        Self {
            scenario_id: scenario_id.into(),
            start_frame: -1,
            end_frame: -1,
            label: NONE_LABEL.into(),
        }
    }

    /// Inclusive frame window of a positive event.
    pub fn window(&self) -> Option<(i64, i64)> {
        self.is_positive()
            .then_some((self.start_frame, self.end_frame))
    }

    fn validate(&self) -> Result<(), String> {
        if self.scenario_id.is_empty() {
            return Err("empty scenario_id".into());
        }
        if self.is_positive() {
            if self.start_frame < 0 || self.start_frame > self.end_frame {
                return Err(format!(
                    "event window [{}, {}] must satisfy 0 <= start <= end",
                    self.start_frame, self.end_frame
                ));
            }
        } else if self.start_frame != -1 || self.end_frame != -1 {
            return Err("'none' rows must carry start = end = -1".into());
        }
        Ok(())
    }
}

pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<GroundTruthEvent>, MediaError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| MediaError::io(path, e))?;
    parse_annotations(&text, path)
}

/// Parses annotation CSV text; `origin` names the source in errors.
pub fn parse_annotations(text: &str, origin: &Path) -> Result<Vec<GroundTruthEvent>, MediaError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| MediaError::parse(origin, 1, e.to_string()))?;
    let expected = ["scenario_id", "start_frame", "end_frame", "label"];
    if headers.iter().ne(expected) {
        return Err(MediaError::parse(
            origin,
            1,
            format!("header must be {}", expected.join(",")),
        ));
    }

    let mut events = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            MediaError::parse(origin, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let frame = |i: usize| {
            record[i]
                .parse::<i64>()
                .map_err(|e| MediaError::parse(origin, line, format!("field {}: {e}", expected[i])))
        };
        let event = GroundTruthEvent {
            scenario_id: record[0].to_string(),
            start_frame: frame(1)?,
            end_frame: frame(2)?,
            label: record[3].to_string(),
        };
        event
            .validate()
            .map_err(|reason| MediaError::parse(origin, line, reason))?;
        events.push(event);
    }
    Ok(events)
}

/// Serializes annotations in the same CSV layout `read_annotations` accepts.
pub fn format_annotations(events: &[GroundTruthEvent]) -> String {
    let mut out = String::from("scenario_id,start_frame,end_frame,label\n");
    for e in events {
        out.push_str(&format!(
            "{},{},{},{}\n",
            e.scenario_id, e.start_frame, e.end_frame, e.label
        ));
    }
    out
}
