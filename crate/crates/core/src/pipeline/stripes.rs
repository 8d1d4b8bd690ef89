//! Stripe plots: Morton codes over time, optionally with the active cells
//! drawn in a band underneath.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::detect::{activations_from_codes, DetectError};
use crate::grid::CELLS;
use crate::media_io::tables::MortonTable;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StripeFormat {
    Svg,
    Csv,
}

impl FromStr for StripeFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "svg" => Ok(StripeFormat::Svg),
            "csv" => Ok(StripeFormat::Csv),
            other => Err(format!("unknown plot format `{other}` (expected svg or csv)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StripeOptions {
    pub format: StripeFormat,
    /// Draw the active cells of every frame.
    pub overlay: bool,
    /// Written into an SVG comment when present.
    pub timestamp: Option<String>,
}

const PLOT_W: f64 = 800.0;
const PLOT_H: f64 = 300.0;
const BAND_H: f64 = 90.0;
const MARGIN: f64 = 50.0;

struct Point {
    frame: usize,
    code: u64,
}

/// Renders the plot. Only nonzero codes get a mark.
pub fn emit_stripes(table: &MortonTable, opts: &StripeOptions) -> Result<String, DetectError> {
    let marks: Vec<Point> = table
        .records
        .iter()
        .filter(|r| r.code != 0)
        .map(|r| Point {
            frame: r.frame,
            code: r.code,
        })
        .collect();
    let cells: Vec<(usize, usize)> = if opts.overlay {
        activations_from_codes(&table.records, &table.quantizer)?
            .iter()
            .flat_map(|a| a.active_cells().map(move |c| (a.frame, c)))
            .collect()
    } else {
        Vec::new()
    };
    Ok(match opts.format {
        StripeFormat::Csv => csv(&marks, &cells),
        StripeFormat::Svg => svg(table, &marks, &cells, opts),
    })
}

fn csv(marks: &[Point], cells: &[(usize, usize)]) -> String {
    let mut out = String::from("kind,frame,value\n");
    for p in marks {
        let _ = writeln!(out, "code,{},{}", p.frame, p.code);
    }
    for (frame, cell) in cells {
        let _ = writeln!(out, "cell,{frame},{cell}");
    }
    out
}

fn svg(table: &MortonTable, marks: &[Point], cells: &[(usize, usize)], opts: &StripeOptions) -> String {
    let last_frame = table.records.last().map_or(1, |r| r.frame.max(1));
    let max_code = marks.iter().map(|p| p.code).max().unwrap_or(1).max(1);
    let band = if opts.overlay { BAND_H + MARGIN * 0.5 } else { 0.0 };
    let (width, height) = (PLOT_W + 2.0 * MARGIN, PLOT_H + 2.0 * MARGIN + band);
    let x = |frame: usize| MARGIN + PLOT_W * frame as f64 / last_frame as f64;
    let y = |code: u64| MARGIN + PLOT_H * (1.0 - code as f64 / max_code as f64);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    if let Some(ts) = &opts.timestamp {
        let _ = writeln!(s, "<!-- generated {} -->", ts.replace("--", "- -"));
    }
    let _ = writeln!(s, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let (x0, x1, y0, y1) = (MARGIN, MARGIN + PLOT_W, MARGIN, MARGIN + PLOT_H);
    let _ = writeln!(
        s,
        r#"<g class="axes" stroke="black" fill="none"><line x1="{x0}" y1="{y1}" x2="{x1}" y2="{y1}"/><line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/></g>"#
    );
    let _ = writeln!(
        s,
        r#"<g class="labels" font-family="sans-serif" font-size="12"><text x="{x0}" y="{}">0</text><text x="{x1}" y="{}" text-anchor="end">{last_frame}</text><text x="{}" y="{}" text-anchor="middle">frame</text><text x="4" y="{}">code ({} bits x {} dims, {})</text></g>"#,
        y1 + 15.0,
        y1 + 15.0,
        (x0 + x1) / 2.0,
        y1 + 30.0,
        y0 - 10.0,
        table.quantizer.bits(),
        table.quantizer.dims(),
        table.variant,
    );
    s.push_str("<g class=\"marks\" fill=\"#1f4e9c\">\n");
    for p in marks {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2"/>"#, x(p.frame), y(p.code));
    }
    s.push_str("</g>\n");
    if opts.overlay {
        let top = y1 + MARGIN * 0.5;
        let row = |cell: usize| top + BAND_H * (cell as f64 - 0.5) / CELLS as f64;
        s.push_str("<g class=\"cells\" fill=\"#d1495b\">\n");
        for &(frame, cell) in cells {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5"/>"#, x(frame), row(cell));
        }
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Variant;
    use crate::zorder::{MortonRecord, Quantizer};

    fn table(codes: &[(usize, u64)]) -> MortonTable {
        MortonTable {
            variant: Variant::Of,
            quantizer: Quantizer::for_variant(Variant::Of, 8).unwrap(),
            records: codes.iter().map(|&(frame, code)| MortonRecord { frame, code }).collect(),
        }
    }

    fn opts(format: StripeFormat) -> StripeOptions {
        StripeOptions {
            format,
            overlay: false,
            timestamp: None,
        }
    }

    #[test]
    fn all_zero_stream_has_axes_and_no_marks() {
        let t = table(&[(0, 0), (1, 0), (2, 0)]);
        let svg = emit_stripes(&t, &opts(StripeFormat::Svg)).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("class=\"axes\""));
        assert_eq!(svg.matches("<circle").count(), 0);
    }

    #[test]
    fn one_mark_per_nonzero_code() {
        let t = table(&[(4, 0), (5, 1), (6, 64), (7, 4095), (8, 0)]);
        let svg = emit_stripes(&t, &opts(StripeFormat::Svg)).unwrap();
        assert_eq!(svg.matches("<circle").count(), 3);
        let csv = emit_stripes(&t, &opts(StripeFormat::Csv)).unwrap();
        assert_eq!(csv.lines().count(), 4);
        assert_eq!(csv.lines().nth(1), Some("code,5,1"));
    }

    #[test]
    fn overlay_marks_active_cells() {
        // level 1 in cell 1 and cell 2 of frame 3
        let t = table(&[(3, 0b11)]);
        let mut o = opts(StripeFormat::Csv);
        o.overlay = true;
        let csv = emit_stripes(&t, &o).unwrap();
        assert!(csv.ends_with("cell,3,1\ncell,3,2\n"), "{csv}");
        o.format = StripeFormat::Svg;
        assert_eq!(emit_stripes(&t, &o).unwrap().matches("<circle").count(), 3);
    }

    #[test]
    fn timestamp_is_optional() {
        let t = table(&[(0, 9)]);
        let mut o = opts(StripeFormat::Svg);
        let plain = emit_stripes(&t, &o).unwrap();
        o.timestamp = Some("2024-01-01T00:00:00Z".into());
        let stamped = emit_stripes(&t, &o).unwrap();
        assert!(!plain.contains("<!--"));
        let without: String = stamped.lines().filter(|l| !l.starts_with("<!--")).map(|l| format!("{l}\n")).collect();
        assert_eq!(without, plain);
    }
}
