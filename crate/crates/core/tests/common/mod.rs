//! Helpers and independent reference implementations shared by the
//! integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sfc_event::detect::{ActivationFrame, DetectParams, Direction, EventWindow};
use sfc_event::flow::FlowField;
use sfc_event::grid::{FlowMeans, CELLS};
use sfc_event::image::GrayImage;

/// Uniform noise blurred with a separable Gaussian and stretched to [0, 1].
pub fn texture(w: usize, h: usize, sigma: f32, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f32> = (0..w * h).map(|_| rng.random::<f32>()).collect();
    let r = (3.0 * sigma).ceil() as isize;
    let k: Vec<f32> = (-r..=r).map(|i| (-(i * i) as f32 / (2.0 * sigma * sigma)).exp()).collect();
    let norm: f32 = k.iter().sum();
    let blur = |src: &[f32], horizontal: bool| -> Vec<f32> {
        let mut out = vec![0.0; w * h];
        for y in 0..h as isize {
            for x in 0..w as isize {
                let mut s = 0.0;
                for (j, g) in (-r..=r).zip(&k) {
                    let (sx, sy) = if horizontal { (x + j, y) } else { (x, y + j) };
                    let sx = sx.clamp(0, w as isize - 1) as usize;
                    let sy = sy.clamp(0, h as isize - 1) as usize;
                    s += g * src[sy * w + sx];
                }
                out[y as usize * w + x as usize] = s / norm;
            }
        }
        out
    };
    let smooth = blur(&blur(&raw, true), false);
    let (lo, hi) = smooth.iter().fold((f32::MAX, f32::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    GrayImage::from_vec(w, h, smooth.iter().map(|v| (v - lo) / (hi - lo)).collect()).unwrap()
}

/// Moves the content by whole pixels, replicating the border.
pub fn shift(img: &GrayImage, dx: isize, dy: isize) -> GrayImage {
    let (w, h) = img.dims();
    GrayImage::from_fn(w, h, |x, y| {
        let sx = (x as isize - dx).clamp(0, w as isize - 1) as usize;
        let sy = (y as isize - dy).clamp(0, h as isize - 1) as usize;
        img.get(sx, sy)
    })
}

pub fn interior_fraction_within(flow: &FlowField, margin: usize, want: (f32, f32), tol: f32) -> f64 {
    let (w, h) = flow.dims();
    let mut hits = 0usize;
    let mut total = 0usize;
    for y in margin..h - margin {
        for x in margin..w - margin {
            let (u, v) = flow.get(x, y);
            total += 1;
            if (u - want.0).hypot(v - want.1) <= tol {
                hits += 1;
            }
        }
    }
    hits as f64 / total as f64
}

// ---- flow features, written from the definition ----

fn direction_deg(u: f64, v: f64) -> f64 {
    if u == 0.0 && v == 0.0 {
        return 0.0;
    }
    let a = u.atan2(v).to_degrees();
    if a == -180.0 {
        180.0
    } else {
        a
    }
}

fn circ(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % 360.0;
    if d > 180.0 {
        360.0 - d
    } else {
        d
    }
}

/// Feature vector at `t` recomputed from the whole stream: baseline frames
/// `t-n-m+1 ..= t-n`, recent frames `t-n+1 ..= t`.
pub fn of_reference(stream: &[FlowMeans], t: usize, n: usize, m: usize, delta: f32, alpha: f32, theta: f32) -> [f32; CELLS] {
    if t + 1 < n + m {
        return [0.0; CELLS];
    }
    let mean = |range: std::ops::Range<usize>, cell: usize| {
        let len = range.len() as f64;
        let (mut su, mut sv) = (0.0f64, 0.0f64);
        for k in range {
            su += f64::from(stream[k].cells[cell][0]);
            sv += f64::from(stream[k].cells[cell][1]);
        }
        (su / len, sv / len)
    };
    std::array::from_fn(|c| {
        let (ru, rv) = mean(t + 1 - n..t + 1, c);
        let (bu, bv) = mean(t + 1 - n - m..t + 1 - n, c);
        if ru == 0.0 && rv == 0.0 {
            return 0.0;
        }
        let tr = direction_deg(ru, rv);
        let d = circ(tr, direction_deg(bu, bv)) as f32;
        let a = f64::from(alpha);
        let near = circ(tr, a).min(circ(tr, -a)) <= f64::from(theta);
        if d > delta && near {
            d
        } else {
            0.0
        }
    })
}

// ---- detector, written from the event conditions ----

/// Highest level, lowest index on ties; 1-based.
pub fn dominant(f: &ActivationFrame) -> Option<usize> {
    let mut best: Option<(usize, u64)> = None;
    for (i, &l) in f.levels.iter().enumerate() {
        if l > 0 && best.is_none_or(|(_, b)| l > b) {
            best = Some((i + 1, l));
        }
    }
    best.map(|(c, _)| c)
}

fn collapsed(frames: &[ActivationFrame]) -> Vec<usize> {
    let mut seq = Vec::new();
    for c in frames.iter().filter_map(dominant) {
        if seq.last() != Some(&c) {
            seq.push(c);
        }
    }
    seq
}

fn active_at(frames: &[ActivationFrame], t: usize) -> bool {
    frames
        .binary_search_by_key(&t, |f| f.frame)
        .is_ok_and(|i| frames[i].levels.iter().any(|&l| l > 0))
}

/// Checks one reported event against the raw activation stream. Returns the
/// reason it is invalid, if any.
pub fn validate_event(frames: &[ActivationFrame], e: &EventWindow, p: &DetectParams) -> Result<(), String> {
    let (s, t) = (e.start_frame, e.end_frame);
    if s > t {
        return Err("start after end".into());
    }
    if !active_at(frames, s) || !active_at(frames, t) {
        return Err("event must start and end on active frames".into());
    }
    let before = s.saturating_sub(p.gap_tolerance + 1)..s;
    let after = t + 1..=t + p.gap_tolerance + 1;
    if before.clone().any(|k| active_at(frames, k)) || after.clone().any(|k| active_at(frames, k)) {
        return Err("event is not a maximal run".into());
    }
    let inside: Vec<ActivationFrame> = frames.iter().filter(|f| (s..=t).contains(&f.frame)).cloned().collect();
    let active: Vec<usize> = inside.iter().filter(|f| dominant(f).is_some()).map(|f| f.frame).collect();
    if active.windows(2).any(|w| w[1] - w[0] - 1 > p.gap_tolerance) {
        return Err("inactive stretch inside the event is too long".into());
    }
    let seq = collapsed(&inside);
    if seq.len() < p.min_distinct_cells {
        return Err(format!("only {} sequential cells", seq.len()));
    }
    if p.require_both_sides && !(seq.iter().any(|&c| c <= 3) && seq.iter().any(|&c| c >= 4)) {
        return Err("one side of the grid only".into());
    }
    if seq.windows(2).any(|w| w[0].abs_diff(w[1]) > p.max_cell_jump) {
        return Err("jump across too many cells".into());
    }
    if t - s + 1 < p.min_event_frames {
        return Err("too short".into());
    }
    let want = match seq[0].cmp(seq.last().unwrap()) {
        std::cmp::Ordering::Less => Direction::LeftToRight,
        std::cmp::Ordering::Greater => Direction::RightToLeft,
        std::cmp::Ordering::Equal => Direction::Unknown,
    };
    if e.direction != want {
        return Err(format!("direction {} should be {want}", e.direction));
    }
    Ok(())
}

/// Every interval that qualifies as an event, found by trying all of them.
/// Only intervals that start and end on isolated-enough active frames can
/// be maximal runs, so the others are skipped before full validation.
pub fn brute_force_events(frames: &[ActivationFrame], p: &DetectParams) -> Vec<(usize, usize, Direction)> {
    let len = frames.iter().map(|f| f.frame + 1).max().unwrap_or(0);
    let active: Vec<bool> = (0..len).map(|t| active_at(frames, t)).collect();
    let quiet = |r: std::ops::Range<usize>| r.into_iter().all(|k| !active.get(k).copied().unwrap_or(false));
    let g = p.gap_tolerance + 1;
    let starts: Vec<usize> = (0..len).filter(|&s| active[s] && quiet(s.saturating_sub(g)..s)).collect();
    let ends: Vec<usize> = (0..len).filter(|&t| active[t] && quiet(t + 1..t + 1 + g)).collect();
    let mut out = Vec::new();
    for &s in &starts {
        for &t in ends.iter().filter(|&&t| t >= s) {
            for d in [Direction::LeftToRight, Direction::RightToLeft, Direction::Unknown] {
                let e = EventWindow {
                    start_frame: s,
                    end_frame: t,
                    variant: sfc_event::features::Variant::Of,
                    direction: d,
                    peak_value: 0.0,
                };
                if validate_event(frames, &e, p).is_ok() {
                    out.push((s, t, d));
                }
            }
        }
    }
    out
}

/// A random activation stream. Half the time a noisy walk across the grid,
/// otherwise independent random frames.
pub fn random_stream(rng: &mut impl Rng, len: usize) -> Vec<ActivationFrame> {
    let walk = rng.random_bool(0.5);
    let mut cell = rng.random_range(1..=CELLS) as isize;
    let step: isize = if rng.random_bool(0.5) { 1 } else { -1 };
    let density = rng.random_range(0.1..0.9);
    (0..len)
        .map(|t| {
            let mut f = ActivationFrame::from_cells(t, &[]);
            if !rng.random_bool(density) {
                return f;
            }
            if walk {
                if rng.random_bool(0.3) {
                    cell = (cell + step * rng.random_range(0i64..=3) as isize).clamp(1, CELLS as isize);
                }
                f.levels[cell as usize - 1] = rng.random_range(1..4);
                if rng.random_bool(0.2) {
                    f.levels[rng.random_range(0..CELLS)] = rng.random_range(1..4);
                }
            } else {
                for l in f.levels.iter_mut() {
                    if rng.random_bool(0.3) {
                        *l = rng.random_range(1..4);
                    }
                }
            }
            f
        })
        .collect()
}
