//! Per-frame feature vectors from per-cell means.
//!
//! The flow path compares the direction of recent motion in each cell with
//! the direction over a preceding baseline window and keeps only large
//! turns towards horizontal motion. The saliency path keeps the single most
//! salient cell above a threshold.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::grid::{FlowMeans, SaliencyMeans, CELLS};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FeatureError {
    #[error("invalid feature parameter: {0}")]
    InvalidParams(String),
    #[error("frame {found} arrived after frame {previous}")]
    UnorderedInput { previous: usize, found: usize },
}

/// Which feature path produced a stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Of,
    Cnn,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Of => "of",
            Variant::Cnn => "cnn",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "of" => Ok(Variant::Of),
            "cnn" => Ok(Variant::Cnn),
            other => Err(format!("unknown variant `{other}` (expected of or cnn)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellFeatureVector {
    pub frame: usize,
    pub values: [f32; CELLS],
    pub variant: Variant,
}

impl CellFeatureVector {
    pub fn zeros(frame: usize, variant: Variant) -> Self {
        Self {
            frame,
            values: [0.0; CELLS],
            variant,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// Direction of motion in degrees, `atan2(u, v)`: rightward is +90, leftward
/// −90, downward 0. The result lies in (−180, 180] and `(0, 0)` maps to 0.
pub fn flow_angle(u: f32, v: f32) -> f32 {
    angle_deg(f64::from(u), f64::from(v)) as f32
}

fn angle_deg(u: f64, v: f64) -> f64 {
    if u == 0.0 && v == 0.0 {
        return 0.0;
    }
    let a = u.atan2(v).to_degrees();
    if a <= -180.0 {
        a + 360.0
    } else {
        a
    }
}

/// Absolute circular difference between two angles, folded into [0, 180].
pub fn angle_diff(a: f32, b: f32) -> f32 {
    circular_diff(f64::from(a), f64::from(b)) as f32
}

fn circular_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).abs().rem_euclid(360.0);
    if d > 180.0 {
        360.0 - d
    } else {
        d
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfParams {
    /// Frames in the recent window.
    pub n: usize,
    /// Frames in the baseline window that precedes it.
    pub m: usize,
    /// Minimum direction change, degrees.
    pub delta: f32,
    /// Event direction, degrees; both +alpha and −alpha qualify.
    pub alpha: f32,
    /// Allowed deviation of the recent direction from ±alpha, degrees.
    pub theta: f32,
}

impl Default for OfParams {
    fn default() -> Self {
        Self {
            n: 4,
            m: 7,
            delta: 75.0,
            alpha: 90.0,
            theta: 20.0,
        }
    }
}

impl OfParams {
    pub fn validate(&self) -> Result<(), FeatureError> {
        let bad = |m: String| Err(FeatureError::InvalidParams(m));
        if self.n < 1 || self.m < 1 {
            return bad(format!("window lengths n={} m={} must be >= 1", self.n, self.m));
        }
        if !(self.delta > 0.0 && self.delta <= 180.0) {
            return bad(format!("delta {} not in (0, 180]", self.delta));
        }
        if !(0.0..=180.0).contains(&self.alpha) {
            return bad(format!("alpha {} not in [0, 180]", self.alpha));
        }
        if !(self.theta > 0.0 && self.theta <= 90.0) {
            return bad(format!("theta {} not in (0, 90]", self.theta));
        }
        Ok(())
    }

    /// Frames of history needed before the first non-trivial output.
    pub fn span(&self) -> usize {
        self.n + self.m
    }
}

/// Feature for one cell given its recent and baseline window means.
fn gated_difference(recent: [f64; 2], baseline: [f64; 2], p: &OfParams) -> f32 {
    if recent == [0.0, 0.0] {
        return 0.0;
    }
    let tr = angle_deg(recent[0], recent[1]);
    let tb = angle_deg(baseline[0], baseline[1]);
    let d = circular_diff(tr, tb) as f32;
    let alpha = f64::from(p.alpha);
    let towards = circular_diff(tr, alpha).min(circular_diff(tr, -alpha));
    if d > p.delta && towards <= f64::from(p.theta) {
        d
    } else {
        0.0
    }
}

fn window_mean(frames: impl Iterator<Item = [f32; 2]>, len: usize) -> [f64; 2] {
    let mut s = [0.0f64; 2];
    for [u, v] in frames {
        s[0] += f64::from(u);
        s[1] += f64::from(v);
    }
    [s[0] / len as f64, s[1] / len as f64]
}

/// Computes the flow feature vector from the last `n + m` cell means, oldest
/// first. This is the whole definition; the streaming extractor calls it on
/// its ring buffer.
pub fn of_vector(window: &[FlowMeans], params: &OfParams) -> [f32; CELLS] {
    assert_eq!(window.len(), params.span(), "window must hold n + m frames");
    let (base, recent) = window.split_at(params.m);
    std::array::from_fn(|i| {
        let r = window_mean(recent.iter().map(|f| f.cells[i]), params.n);
        let b = window_mean(base.iter().map(|f| f.cells[i]), params.m);
        gated_difference(r, b, params)
    })
}

/// Streaming flow-feature extractor for one scenario.
#[derive(Debug)]
pub struct OfExtractor {
    params: OfParams,
    history: VecDeque<FlowMeans>,
    last: Option<usize>,
}

impl OfExtractor {
    pub fn new(params: OfParams) -> Result<Self, FeatureError> {
        params.validate()?;
        let cap = params.span();
        Ok(Self {
            params,
            history: VecDeque::with_capacity(cap),
            last: None,
        })
    }

    /// Consumes the next frame's means. Frames must be consecutive; the first
    /// `n + m - 1` frames of a stream yield zero vectors.
    pub fn push(&mut self, means: FlowMeans) -> Result<CellFeatureVector, FeatureError> {
        if let Some(prev) = self.last {
            if means.frame != prev + 1 {
                return Err(FeatureError::UnorderedInput {
                    previous: prev,
                    found: means.frame,
                });
            }
        }
        self.last = Some(means.frame);
        if self.history.len() == self.params.span() {
            self.history.pop_front();
        }
        self.history.push_back(means);
        if self.history.len() < self.params.span() {
            return Ok(CellFeatureVector::zeros(means.frame, Variant::Of));
        }
        let values = of_vector(self.history.make_contiguous(), &self.params);
        Ok(CellFeatureVector {
            frame: means.frame,
            values,
            variant: Variant::Of,
        })
    }
}

pub fn of_features(
    stream: &[FlowMeans],
    params: &OfParams,
) -> Result<Vec<CellFeatureVector>, FeatureError> {
    let mut ex = OfExtractor::new(params.clone())?;
    stream.iter().map(|m| ex.push(*m)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaliencyParams {
    /// Minimum mean cell saliency for a cell to count as active.
    pub gamma: f32,
}

impl Default for SaliencyParams {
    fn default() -> Self {
        Self { gamma: 0.2 }
    }
}

impl SaliencyParams {
    /// Threshold suited to real driving footage, where saliency is more
    /// diffuse than in rendered scenes.
    pub fn real_world() -> Self {
        Self { gamma: 0.35 }
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(FeatureError::InvalidParams(format!(
                "gamma {} not in (0, 1)",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// Keeps the strongest cell at or above gamma, lowest index on ties.
pub fn saliency_vector(means: &SaliencyMeans, params: &SaliencyParams) -> CellFeatureVector {
    let mut out = CellFeatureVector::zeros(means.frame, Variant::Cnn);
    let mut best: Option<usize> = None;
    for (i, &m) in means.cells.iter().enumerate() {
        if m >= params.gamma && best.is_none_or(|b| m > means.cells[b]) {
            best = Some(i);
        }
    }
    if let Some(b) = best {
        out.values[b] = means.cells[b];
    }
    out
}

pub fn saliency_features(
    stream: &[SaliencyMeans],
    params: &SaliencyParams,
) -> Result<Vec<CellFeatureVector>, FeatureError> {
    params.validate()?;
    for pair in stream.windows(2) {
        if pair[1].frame <= pair[0].frame {
            return Err(FeatureError::UnorderedInput {
                previous: pair[0].frame,
                found: pair[1].frame,
            });
        }
    }
    Ok(stream.iter().map(|m| saliency_vector(m, params)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CellMeans;
    use proptest::prelude::*;

    fn uniform(frame: usize, uv: [f32; 2]) -> FlowMeans {
        CellMeans {
            frame,
            cells: [uv; CELLS],
        }
    }

    #[test]
    fn angle_convention() {
        assert_eq!(flow_angle(1.0, 0.0), 90.0);
        assert_eq!(flow_angle(-1.0, 0.0), -90.0);
        assert_eq!(flow_angle(0.0, 1.0), 0.0);
        assert_eq!(flow_angle(0.0, 0.0), 0.0);
        assert_eq!(flow_angle(0.0, -1.0), 180.0);
        assert_eq!(flow_angle(-0.0, -1.0), 180.0);
    }

    #[test]
    fn angle_diff_folds() {
        assert_eq!(angle_diff(170.0, -170.0), 20.0);
        assert_eq!(angle_diff(-90.0, 90.0), 180.0);
        assert_eq!(angle_diff(10.0, 10.0), 0.0);
    }

    fn run(base: [f32; 2], recent: [f32; 2]) -> [f32; CELLS] {
        let p = OfParams::default();
        let stream: Vec<FlowMeans> = (0..p.span())
            .map(|t| uniform(t, if t < p.m { base } else { recent }))
            .collect();
        of_features(&stream, &p).unwrap().last().unwrap().values
    }

    #[test]
    fn constant_flow_gives_nothing() {
        assert_eq!(run([0.0, 1.0], [0.0, 1.0]), [0.0; CELLS]);
    }

    #[test]
    fn turn_to_horizontal_fires() {
        assert_eq!(run([0.0, 1.0], [1.0, 0.0]), [90.0; CELLS]);
        assert_eq!(run([0.0, 1.0], [-1.0, 0.0]), [90.0; CELLS]);
    }

    #[test]
    fn small_turn_is_suppressed() {
        assert_eq!(run([0.0, 1.0], [0.2, 1.0]), [0.0; CELLS]);
    }

    #[test]
    fn large_turn_off_axis_is_suppressed() {
        // reversal to upward motion: d = 180 but far from ±90
        assert_eq!(run([0.0, 1.0], [0.0, -1.0]), [0.0; CELLS]);
    }

    #[test]
    fn zero_recent_motion_gives_nothing() {
        assert_eq!(run([0.0, 1.0], [0.0, 0.0]), [0.0; CELLS]);
    }

    #[test]
    fn warm_up_is_zero() {
        let p = OfParams::default();
        let stream: Vec<FlowMeans> = (0..20).map(|t| uniform(t, [t as f32, 1.0])).collect();
        let out = of_features(&stream, &p).unwrap();
        assert_eq!(out.len(), 20);
        assert!(out[..p.span() - 1].iter().all(CellFeatureVector::is_zero));
    }

    #[test]
    fn gaps_in_the_stream_are_rejected() {
        let stream = [uniform(0, [0.0, 1.0]), uniform(2, [0.0, 1.0])];
        assert_eq!(
            of_features(&stream, &OfParams::default()),
            Err(FeatureError::UnorderedInput { previous: 0, found: 2 })
        );
    }

    #[test]
    fn saliency_examples() {
        let p = SaliencyParams::default();
        let sal = |cells| saliency_vector(&CellMeans { frame: 0, cells }, &p).values;
        assert_eq!(sal([0.1, 0.3, 0.25, 0.05, 0.0, 0.0]), [0.0, 0.3, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(sal([0.1; 6]), [0.0; 6]);
        assert_eq!(sal([0.0, 0.4, 0.0, 0.0, 0.4, 0.0]), [0.0, 0.4, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(sal([0.2, 0.0, 0.0, 0.0, 0.0, 0.0]), [0.2, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn param_validation() {
        assert!(OfParams { n: 0, ..Default::default() }.validate().is_err());
        assert!(OfParams { delta: 0.0, ..Default::default() }.validate().is_err());
        assert!(OfParams { theta: 91.0, ..Default::default() }.validate().is_err());
        assert!(SaliencyParams { gamma: 1.0 }.validate().is_err());
        assert_eq!(SaliencyParams::real_world().gamma, 0.35);
    }

    proptest! {
        #[test]
        fn diff_is_symmetric_and_folded(a in -180f32..=180.0, b in -180f32..=180.0) {
            let d = angle_diff(a, b);
            prop_assert!((0.0..=180.0).contains(&d));
            prop_assert_eq!(d, angle_diff(b, a));
            prop_assert_eq!(angle_diff(a, a), 0.0);
        }

        #[test]
        fn angle_range(u in -10f32..10.0, v in -10f32..10.0) {
            let a = flow_angle(u, v);
            prop_assert!(a > -180.0 && a <= 180.0);
        }

        #[test]
        fn direction_gating_ignores_scale(
            seq in prop::collection::vec(prop::array::uniform2(-4f32..4.0), 11..40),
            s in prop::sample::select(vec![0.25f32, 0.5, 2.0, 4.0]),
        ) {
            let p = OfParams::default();
            let stream: Vec<FlowMeans> = seq.iter().enumerate().map(|(t, &uv)| uniform(t, uv)).collect();
            let scaled: Vec<FlowMeans> = seq
                .iter()
                .enumerate()
                .map(|(t, &[u, v])| uniform(t, [u * s, v * s]))
                .collect();
            let a = of_features(&stream, &p).unwrap();
            let b = of_features(&scaled, &p).unwrap();
            for (x, y) in a.iter().zip(&b) {
                for (vx, vy) in x.values.iter().zip(y.values) {
                    prop_assert_eq!(*vx == 0.0, vy == 0.0);
                }
            }
        }
    }
}
