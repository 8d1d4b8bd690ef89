//! CSV streams exchanged between pipeline stages.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a stream
//! read back from disk is bit-identical to the one that was written. Streams
//! that need self-description carry a single `# key=value ...` line before
//! the header.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::detect::{Direction, EventWindow};
use crate::eval::MetricsReport;
use crate::features::{CellFeatureVector, Variant};
use crate::grid::{FlowMeans, SaliencyMeans, CELLS};
use crate::zorder::{MortonRecord, Quantizer};

use super::MediaError;

pub const FEATURE_HEADER: [&str; 7] = ["frame", "f1", "f2", "f3", "f4", "f5", "f6"];
pub const MORTON_HEADER: [&str; 2] = ["frame", "code"];
pub const EVENT_HEADER: [&str; 6] = [
    "scenario_id",
    "start_frame",
    "end_frame",
    "variant",
    "direction",
    "peak_value",
];
pub const METRICS_HEADER: [&str; 6] = ["variant", "f1", "sensitivity", "specificity", "mean_iou", "fps"];

/// Splits off a leading `#` line. Returns the comment body, the rest and the
/// number of lines consumed.
fn split_comment(text: &str) -> (Option<&str>, &str, u64) {
    match text.strip_prefix('#') {
        Some(rest) => match rest.split_once('\n') {
            Some((comment, body)) => (Some(comment.trim()), body, 1),
            None => (Some(rest.trim()), "", 1),
        },
        None => (None, text, 0),
    }
}

/// `key=value` pairs of a comment line.
fn comment_fields(comment: &str) -> BTreeMap<&str, &str> {
    comment
        .split_whitespace()
        .filter_map(|kv| kv.split_once('='))
        .collect()
}

struct Row {
    line: u64,
    fields: csv::StringRecord,
}

/// Reads a headed CSV body, checking the header. Line numbers in errors are
/// relative to the whole file.
fn rows(body: &str, origin: &Path, offset: u64, header: &[&str]) -> Result<Vec<Row>, MediaError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let found = reader
        .headers()
        .map_err(|e| MediaError::parse(origin, offset + 1, e.to_string()))?;
    if found.iter().ne(header.iter().copied()) {
        return Err(MediaError::parse(
            origin,
            offset + 1,
            format!("header must be {}", header.join(",")),
        ));
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let fields = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            MediaError::parse(origin, offset + line, e.to_string())
        })?;
        let line = offset + fields.position().map_or(0, |p| p.line());
        out.push(Row { line, fields });
    }
    Ok(out)
}

impl Row {
    fn get<T: FromStr>(&self, i: usize, origin: &Path, name: &str) -> Result<T, MediaError>
    where
        T::Err: std::fmt::Display,
    {
        self.fields[i]
            .parse()
            .map_err(|e| MediaError::parse(origin, self.line, format!("field {name}: {e}")))
    }
}

fn check_ordered(frames: impl Iterator<Item = (u64, usize)>, origin: &Path) -> Result<(), MediaError> {
    let mut previous: Option<usize> = None;
    for (line, f) in frames {
        if previous.is_some_and(|p| f <= p) {
            return Err(MediaError::parse(origin, line, format!("frame {f} out of order")));
        }
        previous = Some(f);
    }
    Ok(())
}

pub fn format_flow_means(means: &[FlowMeans]) -> String {
    let mut out = String::from("frame");
    for i in 1..=CELLS {
        let _ = write!(out, ",c{i}u,c{i}v");
    }
    out.push('\n');
    for m in means {
        let _ = write!(out, "{}", m.frame);
        for [u, v] in m.cells {
            let _ = write!(out, ",{u},{v}");
        }
        out.push('\n');
    }
    out
}

pub fn format_saliency_means(means: &[SaliencyMeans]) -> String {
    let mut out = String::from("frame,c1,c2,c3,c4,c5,c6\n");
    for m in means {
        let _ = write!(out, "{}", m.frame);
        for s in m.cells {
            let _ = write!(out, ",{s}");
        }
        out.push('\n');
    }
    out
}

pub fn format_features(variant: Variant, features: &[CellFeatureVector]) -> String {
    let mut out = format!("# variant={variant}\n{}\n", FEATURE_HEADER.join(","));
    for f in features {
        let _ = write!(out, "{}", f.frame);
        for v in f.values {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

fn variant_of(comment: Option<&str>, origin: &Path) -> Result<Variant, MediaError> {
    let fields = comment.map(comment_fields).unwrap_or_default();
    let v = fields
        .get("variant")
        .ok_or_else(|| MediaError::parse(origin, 1, "missing `# variant=...` line"))?;
    v.parse().map_err(|e: String| MediaError::parse(origin, 1, e))
}

pub fn parse_features(text: &str, origin: &Path) -> Result<(Variant, Vec<CellFeatureVector>), MediaError> {
    let (comment, body, offset) = split_comment(text);
    let variant = variant_of(comment, origin)?;
    let rows = rows(body, origin, offset, &FEATURE_HEADER)?;
    let mut out = Vec::with_capacity(rows.len());
    for row in &rows {
        let mut values = [0.0f32; CELLS];
        for (i, v) in values.iter_mut().enumerate() {
            *v = row.get(i + 1, origin, FEATURE_HEADER[i + 1])?;
            if !(v.is_finite() && *v >= 0.0) {
                return Err(MediaError::parse(origin, row.line, format!("feature {v} must be finite and >= 0")));
            }
        }
        out.push(CellFeatureVector {
            frame: row.get(0, origin, "frame")?,
            values,
            variant,
        });
    }
    check_ordered(rows.iter().zip(&out).map(|(r, f)| (r.line, f.frame)), origin)?;
    Ok((variant, out))
}

/// A Morton stream together with what is needed to decode it.
#[derive(Clone, Debug, PartialEq)]
pub struct MortonTable {
    pub variant: Variant,
    pub quantizer: Quantizer,
    pub records: Vec<MortonRecord>,
}

pub fn format_morton(table: &MortonTable) -> String {
    let q = &table.quantizer;
    let ranges: Vec<String> = q.ranges().iter().map(|(lo, hi)| format!("{lo}:{hi}")).collect();
    let mut out = format!(
        "# variant={} dims={} bits={} ranges={}\n{}\n",
        table.variant,
        q.dims(),
        q.bits(),
        ranges.join(","),
        MORTON_HEADER.join(",")
    );
    for r in &table.records {
        let _ = writeln!(out, "{},{}", r.frame, r.code);
    }
    out
}

fn quantizer_of(comment: Option<&str>, origin: &Path) -> Result<Quantizer, MediaError> {
    let bad = |m: String| MediaError::parse(origin, 1, m);
    let fields = comment.map(comment_fields).unwrap_or_default();
    let field = |k: &str| fields.get(k).copied().ok_or_else(|| bad(format!("header comment lacks `{k}=`")));
    let dims: usize = field("dims")?.parse().map_err(|e| bad(format!("dims: {e}")))?;
    let bits: u32 = field("bits")?.parse().map_err(|e| bad(format!("bits: {e}")))?;
    let ranges = field("ranges")?
        .split(',')
        .map(|r| {
            let (lo, hi) = r.split_once(':').ok_or_else(|| bad(format!("range `{r}` is not lo:hi")))?;
            let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("range `{r}`: {e}")));
            Ok((num(lo)?, num(hi)?))
        })
        .collect::<Result<Vec<_>, MediaError>>()?;
    if ranges.len() != dims {
        return Err(bad(format!("{} ranges for {dims} dimensions", ranges.len())));
    }
    Quantizer::new(ranges, bits).map_err(|e| bad(e.to_string()))
}

pub fn parse_morton(text: &str, origin: &Path) -> Result<MortonTable, MediaError> {
    let (comment, body, offset) = split_comment(text);
    let variant = variant_of(comment, origin)?;
    let quantizer = quantizer_of(comment, origin)?;
    let rows = rows(body, origin, offset, &MORTON_HEADER)?;
    let records = rows
        .iter()
        .map(|row| {
            Ok(MortonRecord {
                frame: row.get(0, origin, "frame")?,
                code: row.get(1, origin, "code")?,
            })
        })
        .collect::<Result<Vec<_>, MediaError>>()?;
    check_ordered(rows.iter().zip(&records).map(|(r, m)| (r.line, m.frame)), origin)?;
    Ok(MortonTable {
        variant,
        quantizer,
        records,
    })
}

/// A detected event tagged with the scenario it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioEvent {
    pub scenario_id: String,
    pub event: EventWindow,
}

pub fn format_events(events: &[ScenarioEvent]) -> String {
    let mut out = format!("{}\n", EVENT_HEADER.join(","));
    for ScenarioEvent { scenario_id, event: e } in events {
        let _ = writeln!(
            out,
            "{scenario_id},{},{},{},{},{}",
            e.start_frame, e.end_frame, e.variant, e.direction, e.peak_value
        );
    }
    out
}

pub fn parse_events(text: &str, origin: &Path) -> Result<Vec<ScenarioEvent>, MediaError> {
    rows(text, origin, 0, &EVENT_HEADER)?
        .iter()
        .map(|row| {
            let event = EventWindow {
                start_frame: row.get(1, origin, "start_frame")?,
                end_frame: row.get(2, origin, "end_frame")?,
                variant: row.get(3, origin, "variant")?,
                direction: row.get::<Direction>(4, origin, "direction")?,
                peak_value: row.get(5, origin, "peak_value")?,
            };
            if event.start_frame > event.end_frame {
                return Err(MediaError::parse(origin, row.line, "start_frame after end_frame"));
            }
            Ok(ScenarioEvent {
                scenario_id: row.fields[0].to_string(),
                event,
            })
        })
        .collect()
}

/// One row per report; `fps` is left empty when it was not measured.
pub fn format_metrics(reports: &[MetricsReport]) -> String {
    let mut out = format!("{}\n", METRICS_HEADER.join(","));
    for r in reports {
        let fps = r.fps.map(|f| f.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{fps}",
            r.variant, r.f1, r.sensitivity, r.specificity, r.mean_iou
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CellMeans;
    use proptest::prelude::*;

    fn here() -> &'static Path {
        Path::new("t.csv")
    }

    #[test]
    fn feature_round_trip_is_exact() {
        let feats = vec![
            CellFeatureVector { frame: 0, values: [0.0; 6], variant: Variant::Of },
            CellFeatureVector {
                frame: 1,
                values: [0.0, 91.234_57, 0.0, 0.0, 179.99998, 1e-7],
                variant: Variant::Of,
            },
        ];
        let text = format_features(Variant::Of, &feats);
        assert!(text.starts_with("# variant=of\nframe,f1,f2,f3,f4,f5,f6\n"));
        assert_eq!(parse_features(&text, here()).unwrap(), (Variant::Of, feats));
    }

    #[test]
    fn features_need_a_variant() {
        let err = parse_features("frame,f1,f2,f3,f4,f5,f6\n", here()).unwrap_err();
        assert!(matches!(err, MediaError::Parse { line: 1, .. }));
    }

    #[test]
    fn morton_header_describes_decoding() {
        let table = MortonTable {
            variant: Variant::Cnn,
            quantizer: Quantizer::for_variant(Variant::Cnn, 8).unwrap(),
            records: vec![MortonRecord { frame: 0, code: 0 }, MortonRecord { frame: 1, code: 65 }],
        };
        let text = format_morton(&table);
        assert_eq!(
            text.lines().next().unwrap(),
            "# variant=cnn dims=6 bits=8 ranges=0:1,0:1,0:1,0:1,0:1,0:1"
        );
        assert_eq!(parse_morton(&text, here()).unwrap(), table);
    }

    #[test]
    fn malformed_row_names_its_line() {
        let text = "# variant=of dims=6 bits=8 ranges=0:180,0:180,0:180,0:180,0:180,0:180\nframe,code\n0,0\n1,abc\n";
        match parse_morton(text, here()) {
            Err(MediaError::Parse { line, reason, .. }) => {
                assert_eq!(line, 4);
                assert!(reason.contains("code"), "{reason}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unordered_frames_are_rejected() {
        let text = "# variant=of dims=6 bits=8 ranges=0:180,0:180,0:180,0:180,0:180,0:180\nframe,code\n3,0\n2,0\n";
        assert!(matches!(parse_morton(text, here()), Err(MediaError::Parse { line: 4, .. })));
    }

    #[test]
    fn events_round_trip() {
        let events = vec![ScenarioEvent {
            scenario_id: "s1".into(),
            event: EventWindow {
                start_frame: 10,
                end_frame: 40,
                variant: Variant::Of,
                direction: Direction::RightToLeft,
                peak_value: 112.5,
            },
        }];
        let text = format_events(&events);
        assert_eq!(text.lines().nth(1), Some("s1,10,40,of,right_to_left,112.5"));
        assert_eq!(parse_events(&text, here()).unwrap(), events);
    }

    #[test]
    fn metrics_rows() {
        let r = MetricsReport {
            variant: Variant::Of,
            tp: 2,
            fp: 1,
            tn: 1,
            fn_: 0,
            sensitivity: 1.0,
            specificity: 0.5,
            f1: 0.8,
            mean_iou: 0.8,
            fps: None,
        };
        let with_fps = MetricsReport { fps: Some(21.5), ..r.clone() };
        let text = format_metrics(&[r, with_fps]);
        assert_eq!(
            text,
            "variant,f1,sensitivity,specificity,mean_iou,fps\nof,0.8,1,0.5,0.8,\nof,0.8,1,0.5,0.8,21.5\n"
        );
    }

    #[test]
    fn mean_tables() {
        let flow = [CellMeans { frame: 3, cells: [[1.5, -0.25]; 6] }];
        let text = format_flow_means(&flow);
        assert!(text.starts_with("frame,c1u,c1v,c2u,c2v"));
        assert_eq!(text.lines().nth(1).unwrap().split(',').count(), 13);
        let sal = [CellMeans { frame: 0, cells: [0.5; 6] }];
        assert_eq!(format_saliency_means(&sal), "frame,c1,c2,c3,c4,c5,c6\n0,0.5,0.5,0.5,0.5,0.5,0.5\n");
    }

    proptest! {
        #[test]
        fn any_feature_value_survives_text(vals in prop::array::uniform6(0f32..=180.0), frame in 0usize..10_000) {
            let f = CellFeatureVector { frame, values: vals, variant: Variant::Of };
            let text = format_features(Variant::Of, &[f]);
            prop_assert_eq!(parse_features(&text, here()).unwrap().1, vec![f]);
        }
    }
}
