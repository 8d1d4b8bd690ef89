//! Displacement estimation from two polynomial expansions.

use super::expansion::{polynomial_expansion, PolyExpansion};
use super::pyramid::{build_pyramid, centre_map};
use super::{FlowError, FlowField, FlowParams};
use crate::image::{bilinear, GrayImage};

/// Added to the diagonal of the averaged normal matrix before solving.
const REGULARIZATION: f64 = 1e-6;
/// Below this determinant the local system carries no motion evidence.
const MIN_DETERMINANT: f64 = 1e-12;

/// Dense flow from `prev` to `next`.
pub fn dense_flow(
    prev: &GrayImage,
    next: &GrayImage,
    params: &FlowParams,
) -> Result<FlowField, FlowError> {
    params.validate()?;
    if prev.dims() != next.dims() {
        return Err(FlowError::GeometryMismatch(prev.dims(), next.dims()));
    }
    let a = expand_pyramid(prev, params)?;
    let b = expand_pyramid(next, params)?;
    Ok(estimate(&a, &b, params))
}

/// Streaming estimator that expands each frame once and reuses it for both
/// pairs it belongs to.
#[derive(Debug)]
pub struct FlowEstimator {
    params: FlowParams,
    prev: Option<Vec<PolyExpansion>>,
}

impl FlowEstimator {
    pub fn new(params: FlowParams) -> Result<Self, FlowError> {
        params.validate()?;
        Ok(Self { params, prev: None })
    }

    pub fn params(&self) -> &FlowParams {
        &self.params
    }

    /// Feeds the next frame; returns the flow from the previous frame once
    /// two frames have been seen.
    pub fn push(&mut self, frame: &GrayImage) -> Result<Option<FlowField>, FlowError> {
        let next = expand_pyramid(frame, &self.params)?;
        let flow = match &self.prev {
            Some(prev) => {
                let (pw, ph) = (prev[0].width(), prev[0].height());
                if (pw, ph) != frame.dims() {
                    return Err(FlowError::GeometryMismatch((pw, ph), frame.dims()));
                }
                Some(estimate(prev, &next, &self.params))
            }
            None => None,
        };
        self.prev = Some(next);
        Ok(flow)
    }

    pub fn reset(&mut self) {
        self.prev = None;
    }
}

fn expand_pyramid(img: &GrayImage, params: &FlowParams) -> Result<Vec<PolyExpansion>, FlowError> {
    if img.width() == 0 || img.height() == 0 {
        return Err(FlowError::EmptyFrame);
    }
    build_pyramid(img, params.pyr_scale, params.levels, params.poly_n)
        .iter()
        .map(|level| polynomial_expansion(level, params.poly_n, params.poly_sigma))
        .collect()
}

fn estimate(prev: &[PolyExpansion], next: &[PolyExpansion], params: &FlowParams) -> FlowField {
    // both pyramids come from equal-sized frames, so they have equal depth
    let coarsest = prev.len().min(next.len()) - 1;
    let mut flow = FlowField::zeros(prev[coarsest].width(), prev[coarsest].height());
    let mut ws = Workspace::default();
    for level in (0..=coarsest).rev() {
        let (p, n) = (&prev[level], &next[level]);
        if level < coarsest {
            flow = upsample(&flow, p.width(), p.height());
        }
        for _ in 0..params.iterations {
            refine(p, n, &mut flow, params.winsize, &mut ws);
        }
    }
    flow
}

/// Resizes a coarse flow to the next finer level and rescales the vectors.
fn upsample(coarse: &FlowField, width: usize, height: usize) -> FlowField {
    let (cw, ch) = coarse.dims();
    let (rx, ry) = (width as f32 / cw as f32, height as f32 / ch as f32);
    let xs: Vec<f32> = (0..width).map(|x| centre_map(x, width, cw)).collect();
    FlowField::from_fn(width, height, |x, y| {
        let (sx, sy) = (xs[x], centre_map(y, height, ch));
        (
            bilinear(coarse.u(), cw, ch, sx, sy) * rx,
            bilinear(coarse.v(), cw, ch, sx, sy) * ry,
        )
    })
}

#[derive(Default)]
struct Workspace {
    /// Per-pixel normal-equation terms `[g11, g12, g22, h1, h2]`.
    terms: Vec<[f32; 5]>,
    row: Vec<[f32; 5]>,
    colsum: Vec<[f64; 5]>,
    padded: Vec<[f64; 5]>,
}

/// One refinement pass: builds the per-pixel normal equations around the
/// current displacement, averages them over the window and solves.
fn refine(p: &PolyExpansion, n: &PolyExpansion, flow: &mut FlowField, winsize: usize, ws: &mut Workspace) {
    let (w, h) = (p.width(), p.height());
    ws.terms.resize(w * h, [0.0; 5]);
    let (fu, fv) = (flow.u(), flow.v());
    let max_x = (w - 1) as f32;
    let max_y = (h - 1) as f32;
    let (pc, nc) = (&p.coeffs, &n.coeffs);
    for (y, ((row_u, row_v), (row_p, out))) in fu
        .chunks_exact(w)
        .zip(fv.chunks_exact(w))
        .zip(pc.chunks_exact(w).zip(ws.terms.chunks_exact_mut(w)))
        .enumerate()
    {
        for x in 0..w {
            let (du, dv) = (row_u[x], row_v[x]);
            // bilinear weights at the displaced position, replicate border
            let sx = (x as f32 + du).clamp(0.0, max_x);
            let sy = (y as f32 + dv).clamp(0.0, max_y);
            // both are non-negative here, so truncation is floor
            let (x0, y0) = (sx as usize, sy as usize);
            let (ax, ay) = (sx - x0 as f32, sy - y0 as f32);
            let base = y0 * w + x0;
            let dx = usize::from(x0 + 1 < w);
            let dy = if y0 + 1 < h { w } else { 0 };
            let (k00, k01, k10, k11) = (&nc[base], &nc[base + dx], &nc[base + dy], &nc[base + dy + dx]);
            let (bx, by) = (1.0 - ax, 1.0 - ay);
            let (w00, w01, w10, w11) = (bx * by, ax * by, bx * ay, ax * ay);
            let mut s = [0.0f32; 5];
            for c in 0..5 {
                s[c] = k00[c] * w00 + k01[c] * w01 + k10[c] * w10 + k11[c] * w11;
            }
            let k = &row_p[x];

            let axx = 0.5 * (k[0] + s[0]);
            let axy = 0.5 * (k[1] + s[1]);
            let ayy = 0.5 * (k[2] + s[2]);
            let dbx = -0.5 * (s[3] - k[3]) + axx * du + axy * dv;
            let dby = -0.5 * (s[4] - k[4]) + axy * du + ayy * dv;

            out[x] = [
                axx * axx + axy * axy,
                axy * (axx + ayy),
                axy * axy + ayy * ayy,
                axx * dbx + axy * dby,
                axy * dbx + ayy * dby,
            ];
        }
    }
    let (u, v) = flow.components_mut();
    box_filter(&ws.terms, w, h, winsize, &mut ws.row, &mut ws.colsum, &mut ws.padded, |y, row| {
        let (u, v) = (&mut u[y * w..][..w], &mut v[y * w..][..w]);
        for (x, t) in row.iter().enumerate() {
            let a = t[0] as f64 + REGULARIZATION;
            let b = t[1] as f64;
            let d = t[2] as f64 + REGULARIZATION;
            let det = a * d - b * b;
            if det < MIN_DETERMINANT {
                u[x] = 0.0;
                v[x] = 0.0;
                continue;
            }
            let inv = 1.0 / det;
            let (r1, r2) = (t[3] as f64, t[4] as f64);
            u[x] = ((d * r1 - b * r2) * inv) as f32;
            v[x] = ((a * r2 - b * r1) * inv) as f32;
        }
    });
}

/// Normalized box filter over interleaved channels with replicate border;
/// window sums are carried in `f64`.
///
/// Vertical sums are kept per column and each output row comes from them via
/// a horizontal running sum. Rows are handed to `emit` in order.
#[allow(clippy::too_many_arguments)]
fn box_filter(
    terms: &[[f32; 5]],
    w: usize,
    h: usize,
    win: usize,
    out: &mut Vec<[f32; 5]>,
    colsum: &mut Vec<[f64; 5]>,
    padded: &mut Vec<[f64; 5]>,
    mut emit: impl FnMut(usize, &[[f32; 5]]),
) {
    let r = win / 2;
    let cy = |y: isize| y.clamp(0, h as isize - 1) as usize;
    let norm = 1.0 / (win * win) as f64;

    colsum.clear();
    colsum.resize(w, [0.0; 5]);
    for l in -(r as isize)..=r as isize {
        let src = &terms[cy(l) * w..(cy(l) + 1) * w];
        for (c, t) in colsum.iter_mut().zip(src) {
            for k in 0..5 {
                c[k] += t[k] as f64;
            }
        }
    }
    out.clear();
    out.resize(w, [0.0; 5]);
    padded.clear();
    padded.resize(w + 2 * r + 1, [0.0; 5]);
    for y in 0..h {
        padded[..r].fill(colsum[0]);
        padded[r..r + w].copy_from_slice(colsum);
        padded[r + w..].fill(colsum[w - 1]);
        let mut s = [0.0f64; 5];
        for v in &padded[..win] {
            for k in 0..5 {
                s[k] += v[k];
            }
        }
        for x in 0..w {
            for k in 0..5 {
                out[x][k] = (s[k] * norm) as f32;
                s[k] += padded[x + win][k] - padded[x][k];
            }
        }
        emit(y, out);

        if y + 1 < h {
            let yi = y as isize;
            let (ai, si) = (cy(yi + r as isize + 1), cy(yi - r as isize));
            for x in 0..w {
                let (a, b) = (&terms[ai * w + x], &terms[si * w + x]);
                for k in 0..5 {
                    colsum[x][k] += a[k] as f64 - b[k] as f64;
                }
            }
        }
    }
}
