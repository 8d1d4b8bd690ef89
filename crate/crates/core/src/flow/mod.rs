//! Dense optical flow by polynomial expansion (Farnebäck) with coarse-to-fine
//! pyramidal refinement.
//!
//! Every pixel neighbourhood is approximated by a quadratic
//! `f(x) ≈ xᵀAx + bᵀx + c`. If the second frame is the first one translated by
//! `d`, the expansions satisfy `b₂ = b₁ − 2Ad`, so the displacement follows from
//! a 2×2 linear system. Averaging the normal equations over a window makes the
//! solve robust, and running it on an image pyramid extends the capture range to
//! large motions.

mod expansion;
mod farneback;
mod pyramid;

pub use expansion::{polynomial_expansion, PolyExpansion};
pub use farneback::{dense_flow, FlowEstimator};
pub use pyramid::build_pyramid;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FlowError {
    #[error("invalid flow parameter: {0}")]
    InvalidParams(String),
    #[error("frame geometry mismatch: {0:?} vs {1:?}")]
    GeometryMismatch((usize, usize), (usize, usize)),
    #[error("empty frame")]
    EmptyFrame,
}

/// Farnebäck parameters. Defaults target large, fast motions such as a
/// pedestrian crossing in front of the camera.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowParams {
    /// Downscale ratio between consecutive pyramid levels.
    pub pyr_scale: f32,
    /// Number of pyramid levels including the full-resolution image.
    pub levels: usize,
    /// Side of the square window the normal equations are averaged over.
    pub winsize: usize,
    /// Refinement passes per pyramid level.
    pub iterations: usize,
    /// Side of the polynomial-expansion neighbourhood.
    pub poly_n: usize,
    /// Standard deviation of the Gaussian applicability in the expansion.
    pub poly_sigma: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            pyr_scale: 0.5,
            levels: 3,
            winsize: 15,
            iterations: 3,
            poly_n: 5,
            poly_sigma: 1.2,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<(), FlowError> {
        let fail = |msg: String| Err(FlowError::InvalidParams(msg));
        if !(self.pyr_scale > 0.0 && self.pyr_scale < 1.0) {
            return fail(format!("pyr_scale {} not in (0, 1)", self.pyr_scale));
        }
        if self.levels < 1 {
            return fail("levels must be >= 1".into());
        }
        if self.winsize < 3 || self.winsize.is_multiple_of(2) {
            return fail(format!("winsize {} must be odd and >= 3", self.winsize));
        }
        if self.iterations < 1 {
            return fail("iterations must be >= 1".into());
        }
        validate_expansion(self.poly_n, self.poly_sigma)
    }
}

pub(crate) fn validate_expansion(poly_n: usize, poly_sigma: f64) -> Result<(), FlowError> {
    if poly_n < 3 || poly_n.is_multiple_of(2) {
        return Err(FlowError::InvalidParams(format!(
            "poly_n {poly_n} must be odd and >= 3"
        )));
    }
    if !(poly_sigma > 0.0 && poly_sigma.is_finite()) {
        return Err(FlowError::InvalidParams(format!(
            "poly_sigma {poly_sigma} must be positive"
        )));
    }
    Ok(())
}

/// Per-pixel displacement `(u, v)` in pixels; `u` grows rightward, `v` downward.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    u: Vec<f32>,
    v: Vec<f32>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            u: vec![0.0; width * height],
            v: vec![0.0; width * height],
        }
    }

    pub fn from_components(width: usize, height: usize, u: Vec<f32>, v: Vec<f32>) -> Option<Self> {
        (u.len() == width * height && v.len() == width * height).then_some(Self {
            width,
            height,
            u,
            v,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> (f32, f32),
    ) -> Self {
        let mut field = Self::zeros(width, height);
        for y in 0..height {
            for x in 0..width {
                let (u, v) = f(x, y);
                field.u[y * width + x] = u;
                field.v[y * width + x] = v;
            }
        }
        field
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn u(&self) -> &[f32] {
        &self.u
    }

    pub fn v(&self) -> &[f32] {
        &self.v
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> (f32, f32) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).all(|c| c.is_finite())
    }

    pub fn max_magnitude(&self) -> f32 {
        self.u
            .iter()
            .zip(&self.v)
            .map(|(u, v)| u.hypot(*v))
            .fold(0.0, f32::max)
    }

    pub(crate) fn components_mut(&mut self) -> (&mut [f32], &mut [f32]) {
        (&mut self.u, &mut self.v)
    }
}
