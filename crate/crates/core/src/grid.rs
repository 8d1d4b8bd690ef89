//! Region of interest split into six cells, three on each side of a central
//! gap, plus per-cell aggregation of flow and saliency.

use serde::{Deserialize, Serialize};

use crate::flow::FlowField;
use crate::image::GrayImage;

/// Number of grid cells.
pub const CELLS: usize = 6;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GridError {
    #[error("degenerate grid: {0}")]
    DegenerateCell(String),
    #[error("grid built for {expected:?}, input is {found:?}")]
    GeometryMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("cell {cell} mean is not finite")]
    NonFinite { cell: usize },
}

/// Fractional grid layout, independent of the frame size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// `[x0, y0, x1, y1]` in frame fractions.
    pub roi: [f64; 4],
    /// `[gx0, gx1]`, the excluded central band.
    pub gap: [f64; 2],
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            roi: [0.15, 0.35, 0.85, 0.75],
            gap: [0.45, 0.55],
        }
    }
}

/// Half-open pixel rectangle `[x0, x1) × [y0, y1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl CellRect {
    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.x0..self.x1).contains(&x) && (self.y0..self.y1).contains(&y)
    }
}

/// A rasterized grid for one frame size. Cell `i` (1-based in the domain,
/// index `i - 1` here) runs left to right.
#[derive(Clone, Debug, PartialEq)]
pub struct RoiGrid {
    width: usize,
    height: usize,
    spec: GridSpec,
    cells: [CellRect; CELLS],
}

impl RoiGrid {
    pub fn frame_dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn cells(&self) -> &[CellRect; CELLS] {
        &self.cells
    }

    /// Zero-based index of the cell containing the pixel, if any.
    pub fn cell_at(&self, x: usize, y: usize) -> Option<usize> {
        self.cells.iter().position(|c| c.contains(x, y))
    }
}

// Fractions such as 0.15 · 640 land a hair off an integer; snap those so
// floor and ceil agree with exact arithmetic.
fn scaled(f: f64, len: usize) -> f64 {
    let v = f * len as f64;
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        r
    } else {
        v
    }
}

fn lo_edge(f: f64, len: usize) -> usize {
    scaled(f, len).floor() as usize
}

fn hi_edge(f: f64, len: usize) -> usize {
    scaled(f, len).ceil() as usize
}

/// Three columns measured from the outer edge of a side, so the two sides
/// of a symmetric layout are exact mirror images.
fn split3(lo: usize, hi: usize, from_right: bool) -> [(usize, usize); 3] {
    let span = hi - lo;
    let at = |k: usize| if from_right { hi - (3 - k) * span / 3 } else { lo + k * span / 3 };
    [(at(0), at(1)), (at(1), at(2)), (at(2), at(3))]
}

/// Rasterizes the fractional layout onto a `width × height` frame. Low edges
/// round down and high edges round up.
pub fn make_grid(width: usize, height: usize, spec: &GridSpec) -> Result<RoiGrid, GridError> {
    let [x0, y0, x1, y1] = spec.roi;
    let [gx0, gx1] = spec.gap;
    let all = [x0, y0, x1, y1, gx0, gx1];
    if all.iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(GridError::DegenerateCell(format!(
            "fractions {all:?} must lie in [0, 1]"
        )));
    }
    if !(x0 < gx0 && gx0 < gx1 && gx1 < x1 && y0 < y1) {
        return Err(GridError::DegenerateCell(format!(
            "need x0 < gx0 < gx1 < x1 and y0 < y1, got roi {:?} gap {:?}",
            spec.roi, spec.gap
        )));
    }
    let (left_lo, left_hi) = (lo_edge(x0, width), hi_edge(gx0, width));
    let (right_lo, right_hi) = (lo_edge(gx1, width), hi_edge(x1, width));
    let (top, bottom) = (lo_edge(y0, height), hi_edge(y1, height));
    if left_hi > right_lo {
        return Err(GridError::DegenerateCell(format!(
            "gap collapses at width {width}: left side ends at {left_hi}, right starts at {right_lo}"
        )));
    }
    let mut cells = [CellRect {
        x0: 0,
        y0: top,
        x1: 0,
        y1: bottom,
    }; CELLS];
    let cols = split3(left_lo, left_hi, false).into_iter().chain(split3(right_lo, right_hi, true));
    for (cell, (a, b)) in cells.iter_mut().zip(cols) {
        cell.x0 = a;
        cell.x1 = b;
    }
    if let Some(i) = cells.iter().position(|c| c.area() == 0) {
        return Err(GridError::DegenerateCell(format!(
            "cell {} is empty on a {width}x{height} frame",
            i + 1
        )));
    }
    Ok(RoiGrid {
        width,
        height,
        spec: spec.clone(),
        cells,
    })
}

/// Per-cell values for one frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellMeans<T> {
    pub frame: usize,
    pub cells: [T; CELLS],
}

/// Mean flow vector `[u, v]` per cell.
pub type FlowMeans = CellMeans<[f32; 2]>;
/// Mean saliency per cell.
pub type SaliencyMeans = CellMeans<f32>;

fn check_dims(grid: &RoiGrid, found: (usize, usize)) -> Result<(), GridError> {
    if grid.frame_dims() != found {
        return Err(GridError::GeometryMismatch {
            expected: grid.frame_dims(),
            found,
        });
    }
    Ok(())
}

fn cell_sum(plane: &[f32], width: usize, cell: &CellRect) -> f64 {
    let mut sum = 0.0f64;
    for y in cell.y0..cell.y1 {
        for &p in &plane[y * width + cell.x0..y * width + cell.x1] {
            sum += f64::from(p);
        }
    }
    sum
}

pub fn cell_mean_flow(flow: &FlowField, grid: &RoiGrid, frame: usize) -> Result<FlowMeans, GridError> {
    check_dims(grid, flow.dims())?;
    let w = flow.width();
    let mut cells = [[0.0f32; 2]; CELLS];
    for (i, (out, rect)) in cells.iter_mut().zip(grid.cells()).enumerate() {
        let n = rect.area() as f64;
        let mean = [cell_sum(flow.u(), w, rect) / n, cell_sum(flow.v(), w, rect) / n];
        if !mean.iter().all(|m| m.is_finite()) {
            return Err(GridError::NonFinite { cell: i + 1 });
        }
        *out = mean.map(|m| m as f32);
    }
    Ok(CellMeans { frame, cells })
}

pub fn cell_mean_saliency(
    map: &GrayImage,
    grid: &RoiGrid,
    frame: usize,
) -> Result<SaliencyMeans, GridError> {
    check_dims(grid, map.dims())?;
    let mut cells = [0.0f32; CELLS];
    for (i, (out, rect)) in cells.iter_mut().zip(grid.cells()).enumerate() {
        let mean = cell_sum(map.data(), map.width(), rect) / rect.area() as f64;
        if !mean.is_finite() {
            return Err(GridError::NonFinite { cell: i + 1 });
        }
        *out = mean as f32;
    }
    Ok(CellMeans { frame, cells })
}
