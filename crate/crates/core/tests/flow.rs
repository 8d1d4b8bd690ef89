use std::time::Instant;

mod common;

use common::{interior_fraction_within, shift, texture};
use sfc_event::flow::{dense_flow, FlowParams};

#[test]
fn recovers_three_pixel_translation() {
    let prev = texture(256, 256, 2.0, 7);
    let next = shift(&prev, 3, 0);
    let start = Instant::now();
    let flow = dense_flow(&prev, &next, &FlowParams::default()).unwrap();
    let elapsed = start.elapsed();
    let frac = interior_fraction_within(&flow, 16, (3.0, 0.0), 0.5);
    println!("fraction within 0.5 px: {frac:.4}, {elapsed:?}");
    assert!(frac >= 0.9, "{frac}");
    assert!(flow.is_finite());
}

#[test]
fn identical_frames_have_no_motion() {
    for seed in 0..3 {
        let img = texture(128, 96, 1.5, seed);
        let flow = dense_flow(&img, &img, &FlowParams::default()).unwrap();
        assert!(flow.max_magnitude() <= 0.1);
    }
}

#[test]
fn translation_in_other_directions() {
    let prev = texture(160, 160, 2.0, 11);
    for (dx, dy) in [(-2isize, 0isize), (0, 2), (2, -1), (-4, 3)] {
        let next = shift(&prev, dx, dy);
        let flow = dense_flow(&prev, &next, &FlowParams::default()).unwrap();
        let frac = interior_fraction_within(&flow, 16, (dx as f32, dy as f32), 0.5);
        assert!(frac >= 0.9, "({dx},{dy}): {frac}");
    }
}

#[test]
fn shift_equivariance_in_interior() {
    let base = texture(128, 128, 2.0, 5);
    let prev = base.clone();
    let next = shift(&base, 2, 1);
    let flow = dense_flow(&prev, &next, &FlowParams::default()).unwrap();
    for (sx, sy) in [(3isize, 0isize), (-2, 4), (4, -4)] {
        let shifted = dense_flow(&shift(&prev, sx, sy), &shift(&next, sx, sy), &FlowParams::default())
            .unwrap();
        let mut worst = 0.0f32;
        for y in 24..104usize {
            for x in 24..104usize {
                let (u0, v0) = flow.get(x, y);
                let (u1, v1) = shifted.get((x as isize + sx) as usize, (y as isize + sy) as usize);
                worst = worst.max((u0 - u1).hypot(v0 - v1));
            }
        }
        assert!(worst <= 0.25, "shift ({sx},{sy}): {worst}");
    }
}

#[test]
fn vga_pair_timing() {
    let prev = texture(640, 480, 2.0, 3);
    let next = shift(&prev, 2, 1);
    let start = Instant::now();
    let flow = dense_flow(&prev, &next, &FlowParams::default()).unwrap();
    println!("640x480 pair: {:?}", start.elapsed());
    assert!(interior_fraction_within(&flow, 16, (2.0, 1.0), 0.5) > 0.9);
}
