//! Seeded synthetic driving scenes with a known answer.
//!
//! The background is smooth value noise drifting slowly downward, which is
//! roughly what forward ego-motion looks like in the lower half of a frame.
//! A crossing scene adds a textured rectangle moving horizontally through the
//! region of interest at constant speed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::grid::GridSpec;
use crate::image::GrayImage;
use crate::media_io::{FrameSequence, GroundTruthEvent, SaliencySequence};

use super::EvalError;

/// Downward background motion in pixels per frame.
pub const BACKGROUND_DRIFT: f32 = 0.15;
/// Frames before the object enters, long enough for the feature windows to
/// fill with background motion.
pub const LEAD_IN_FRAMES: usize = 12;
const MIN_SIDE: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StartSide {
    Left,
    Right,
}

impl std::fmt::Display for StartSide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StartSide::Left => "left",
            StartSide::Right => "right",
        })
    }
}

impl std::str::FromStr for StartSide {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "left" => Ok(StartSide::Left),
            "right" => Ok(StartSide::Right),
            other => Err(format!("unknown side `{other}` (expected left or right)")),
        }
    }
}

/// Frames, matching pseudo-saliency and the expected answer.
#[derive(Clone, Debug)]
pub struct SyntheticScenario {
    pub frames: FrameSequence,
    pub saliency: SaliencySequence,
    pub truth: GroundTruthEvent,
}

/// Tileable value noise with smoothstep interpolation, so sampling at
/// fractional offsets moves the pattern without resampling artefacts.
struct ValueNoise {
    lattice: Vec<f32>,
    cols: usize,
    rows: usize,
    spacing: f32,
}

impl ValueNoise {
    fn new(rng: &mut ChaCha8Rng, cols: usize, rows: usize, spacing: f32) -> Self {
        let lattice = (0..cols * rows).map(|_| rng.random::<f32>()).collect();
        Self {
            lattice,
            cols,
            rows,
            spacing,
        }
    }

    fn at(&self, i: i64, j: i64) -> f32 {
        let i = i.rem_euclid(self.cols as i64) as usize;
        let j = j.rem_euclid(self.rows as i64) as usize;
        self.lattice[j * self.cols + i]
    }

    fn sample(&self, x: f32, y: f32) -> f32 {
        let (gx, gy) = (x / self.spacing, y / self.spacing);
        let (fx, fy) = (gx.floor(), gy.floor());
        let smooth = |t: f32| t * t * (3.0 - 2.0 * t);
        let (tx, ty) = (smooth(gx - fx), smooth(gy - fy));
        let (i, j) = (fx as i64, fy as i64);
        let top = self.at(i, j) * (1.0 - tx) + self.at(i + 1, j) * tx;
        let bottom = self.at(i, j + 1) * (1.0 - tx) + self.at(i + 1, j + 1) * tx;
        top * (1.0 - ty) + bottom * ty
    }
}

/// The moving rectangle: size, vertical placement and horizontal path.
#[derive(Clone, Copy, Debug)]
struct Mover {
    w: f32,
    h: f32,
    top: f32,
}

impl Mover {
    fn for_frame(width: usize, height: usize, grid: &GridSpec) -> Self {
        let [_, y0, _, y1] = grid.roi;
        let roi_h = (y1 - y0) as f32 * height as f32;
        let h = (0.8 * roi_h).round().max(4.0);
        let w = (width as f32 / 10.0).round().max(8.0);
        let top = ((y0 + y1) as f32 * 0.5 * height as f32 - h * 0.5).round();
        Self { w, h, top }
    }
}

fn check_geometry(width: usize, height: usize, speed: f32) -> Result<(), EvalError> {
    if width < MIN_SIDE || height < MIN_SIDE {
        return Err(EvalError::Geometry(format!(
            "scene must be at least {MIN_SIDE}x{MIN_SIDE}, got {width}x{height}"
        )));
    }
    if !(speed.is_finite() && speed > 0.0) {
        return Err(EvalError::Geometry(format!(
            "speed {speed} never moves the object"
        )));
    }
    Ok(())
}

/// Frames whose rectangle centre lies inside the horizontal extent of the
/// region of interest, for a rectangle of width `w` whose right edge touches
/// the left border at the end of the lead-in.
fn centre_window(width: usize, frame_count: usize, speed: f32, w: f32, grid: &GridSpec) -> Option<(i64, i64)> {
    let [x0, _, x1, _] = grid.roi;
    let (lo, hi) = (x0 * width as f64, x1 * width as f64);
    let (speed, half) = (f64::from(speed), f64::from(w) / 2.0);
    // centre(t) = speed·(t − lead) − w/2
    let lead = LEAD_IN_FRAMES as f64;
    let first = ((lo + half) / speed + lead).ceil().max(0.0) as i64;
    let last = (((hi + half) / speed + lead).floor() as i64).min(frame_count as i64 - 1);
    (first <= last).then_some((first, last))
}

/// Frames for the object to cross the whole frame plus a short tail, so the
/// crossing completes inside the sequence.
pub fn crossing_frame_count(width: usize, speed: f32) -> usize {
    let w = Mover::for_frame(width, MIN_SIDE, &GridSpec::default()).w;
    LEAD_IN_FRAMES + ((width as f32 + w) / speed).ceil() as usize + 15
}

/// Analytic ground-truth window for [`generate_crossing`] on the default grid.
pub fn crossing_window(width: usize, height: usize, frame_count: usize, speed: f32) -> Option<(i64, i64)> {
    let grid = GridSpec::default();
    let mover = Mover::for_frame(width, height, &grid);
    centre_window(width, frame_count, speed, mover.w, &grid)
}

fn background(width: usize, height: usize, seed: u64) -> ValueNoise {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spacing = 6.0;
    let cols = (width as f32 / spacing).ceil() as usize + 1;
    let rows = (height as f32 / spacing).ceil() as usize + 1;
    ValueNoise::new(&mut rng, cols, rows, spacing)
}

fn object_texture(seed: u64) -> ValueNoise {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5e_ed0b_1ec7);
    ValueNoise::new(&mut rng, 64, 64, 3.0)
}

fn background_value(bg: &ValueNoise, x: usize, y: usize, t: usize) -> f32 {
    0.2 + 0.35 * bg.sample(x as f32, y as f32 - BACKGROUND_DRIFT * t as f32)
}

/// Composites a rectangle at `(left, top)` over the drifting background.
/// Horizontal edges are antialiased by pixel coverage.
fn render(bg: &ValueNoise, tex: &ValueNoise, width: usize, height: usize, t: usize, obj: Option<(f32, f32, Mover)>) -> GrayImage {
    GrayImage::from_fn(width, height, |x, y| {
        let base = background_value(bg, x, y, t);
        let Some((left, top, m)) = obj else {
            return base;
        };
        let (xf, yf) = (x as f32, y as f32);
        let cov_x = ((xf + 1.0).min(left + m.w) - xf.max(left)).clamp(0.0, 1.0);
        let cov_y = ((yf + 1.0).min(top + m.h) - yf.max(top)).clamp(0.0, 1.0);
        let cov = cov_x * cov_y;
        if cov == 0.0 {
            return base;
        }
        let fg = 0.65 + 0.35 * tex.sample(xf + 0.5 - left, yf + 0.5 - top);
        (base * (1.0 - cov) + fg * cov).clamp(0.0, 1.0)
    })
}

fn blob(width: usize, height: usize, cx: f32, cy: f32, m: Mover) -> GrayImage {
    let (sx, sy) = (m.w * 0.5, m.h * 0.5);
    GrayImage::from_fn(width, height, |x, y| {
        let dx = (x as f32 + 0.5 - cx) / sx;
        let dy = (y as f32 + 0.5 - cy) / sy;
        (-0.5 * (dx * dx + dy * dy)).exp()
    })
}

fn mirror(img: &GrayImage) -> GrayImage {
    let w = img.width();
    GrayImage::from_fn(w, img.height(), |x, y| img.get(w - 1 - x, y))
}

fn sequences(width: usize, height: usize, frames: Vec<GrayImage>, maps: Vec<GrayImage>) -> (FrameSequence, SaliencySequence) {
    // the generator only produces in-range values, so validation cannot fail
    let f = FrameSequence::new(width, height, frames).expect("synthetic frames are valid");
    let s = SaliencySequence::new(width, height, maps).expect("synthetic saliency is valid");
    (f, s)
}

/// A rectangle crossing the region of interest horizontally at `speed`
/// pixels per frame. The right-started scene is the exact mirror image of
/// the left-started one.
pub fn generate_crossing(
    width: usize,
    height: usize,
    frame_count: usize,
    start_side: StartSide,
    speed: f32,
    seed: u64,
) -> Result<SyntheticScenario, EvalError> {
    check_geometry(width, height, speed)?;
    let grid = GridSpec::default();
    let m = Mover::for_frame(width, height, &grid);
    let window = centre_window(width, frame_count, speed, m.w, &grid).ok_or_else(|| {
        EvalError::Geometry(format!(
            "object centre never enters the region within {frame_count} frames at speed {speed}"
        ))
    })?;
    let (bg, tex) = (background(width, height, seed), object_texture(seed));
    let mut frames = Vec::with_capacity(frame_count);
    let mut maps = Vec::with_capacity(frame_count);
    for t in 0..frame_count {
        let left = speed * (t as f32 - LEAD_IN_FRAMES as f32) - m.w;
        let frame = render(&bg, &tex, width, height, t, Some((left, m.top, m)));
        let map = blob(width, height, left + m.w * 0.5, m.top + m.h * 0.5, m);
        match start_side {
            StartSide::Left => {
                frames.push(frame);
                maps.push(map);
            }
            StartSide::Right => {
                frames.push(mirror(&frame));
                maps.push(mirror(&map));
            }
        }
    }
    let (frames, saliency) = sequences(width, height, frames, maps);
    Ok(SyntheticScenario {
        frames,
        saliency,
        truth: GroundTruthEvent {
            scenario_id: format!("crossing_{start_side}_{speed}_{seed}"),
            start_frame: window.0,
            end_frame: window.1,
            label: match start_side {
                StartSide::Left => "crossing_lr",
                StartSide::Right => "crossing_rl",
            }
            .into(),
        },
    })
}

/// Background drift only, nothing crosses.
pub fn generate_static(width: usize, height: usize, frame_count: usize, seed: u64) -> Result<SyntheticScenario, EvalError> {
    check_geometry(width, height, 1.0)?;
    let bg = background(width, height, seed);
    let tex = object_texture(seed);
    let frames = (0..frame_count)
        .map(|t| render(&bg, &tex, width, height, t, None))
        .collect();
    let maps = (0..frame_count).map(|_| GrayImage::new(width, height)).collect();
    let (frames, saliency) = sequences(width, height, frames, maps);
    Ok(SyntheticScenario {
        frames,
        saliency,
        truth: GroundTruthEvent::none(format!("static_{seed}")),
    })
}

/// The same rectangle moving straight up through the left half of the
/// region, against the background drift.
pub fn generate_vertical_mover(
    width: usize,
    height: usize,
    frame_count: usize,
    speed: f32,
    seed: u64,
) -> Result<SyntheticScenario, EvalError> {
    check_geometry(width, height, speed)?;
    let grid = GridSpec::default();
    let m = Mover::for_frame(width, height, &grid);
    let left = ((grid.roi[0] + grid.gap[0]) as f32 * 0.5 * width as f32 - m.w * 0.5).round();
    let (bg, tex) = (background(width, height, seed), object_texture(seed));
    let mut frames = Vec::with_capacity(frame_count);
    let mut maps = Vec::with_capacity(frame_count);
    for t in 0..frame_count {
        let top = height as f32 - speed * t as f32;
        frames.push(render(&bg, &tex, width, height, t, Some((left, top, m))));
        maps.push(blob(width, height, left + m.w * 0.5, top + m.h * 0.5, m));
    }
    let (frames, saliency) = sequences(width, height, frames, maps);
    Ok(SyntheticScenario {
        frames,
        saliency,
        truth: GroundTruthEvent::none(format!("vertical_{speed}_{seed}")),
    })
}
