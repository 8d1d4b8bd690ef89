//! Image pyramids for coarse-to-fine estimation.
//!
//! Each level is the one below it smoothed with the 5-tap binomial
//! `[1, 4, 6, 4, 1] / 16` and resampled bilinearly to `round(len · pyr_scale)`
//! pixels per side. Sampling is centre-aligned with the exact size ratio, so
//! the pyramid of a mirrored image is the mirrored pyramid.

use crate::image::GrayImage;

/// Levels from full resolution down; stops before a level whose shorter side
/// would drop below `min_side`.
pub fn build_pyramid(img: &GrayImage, pyr_scale: f32, levels: usize, min_side: usize) -> Vec<GrayImage> {
    let mut out = vec![img.clone()];
    while out.len() < levels {
        let prev = out.last().unwrap();
        let (w, h) = (scaled_len(prev.width(), pyr_scale), scaled_len(prev.height(), pyr_scale));
        if w.min(h) < min_side {
            break;
        }
        out.push(resample(&binomial_blur(prev), w, h));
    }
    out
}

pub(crate) fn scaled_len(len: usize, scale: f32) -> usize {
    ((len as f32 * scale).round() as usize).max(1)
}

/// Position in a `from`-pixel axis of pixel `i` of a `to`-pixel axis spanning
/// the same extent.
#[inline]
pub(crate) fn centre_map(i: usize, to: usize, from: usize) -> f32 {
    (i as f32 + 0.5) * (from as f32 / to as f32) - 0.5
}

fn binomial_blur(img: &GrayImage) -> GrayImage {
    const K: [f32; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
    let (w, h) = img.dims();
    let mut tmp = GrayImage::new(w, h);
    let mut padded = vec![0.0f32; w + 4];
    for y in 0..h {
        let row = img.row(y);
        padded[..2].fill(row[0]);
        padded[2..w + 2].copy_from_slice(row);
        padded[w + 2..].fill(row[w - 1]);
        let out = &mut tmp.data_mut()[y * w..(y + 1) * w];
        for (j, g) in K.iter().enumerate() {
            for (o, p) in out.iter_mut().zip(&padded[j..j + w]) {
                *o += g * p;
            }
        }
    }
    let mut out = GrayImage::new(w, h);
    for y in 0..h {
        for (j, g) in K.iter().enumerate() {
            let sy = (y as isize + j as isize - 2).clamp(0, h as isize - 1) as usize;
            let src = &tmp.data()[sy * w..(sy + 1) * w];
            let dst = &mut out.data_mut()[y * w..(y + 1) * w];
            for (o, p) in dst.iter_mut().zip(src) {
                *o += g * p;
            }
        }
    }
    out
}

fn resample(img: &GrayImage, w: usize, h: usize) -> GrayImage {
    let (sw, sh) = img.dims();
    let xs: Vec<f32> = (0..w).map(|x| centre_map(x, w, sw)).collect();
    GrayImage::from_fn(w, h, |x, y| img.sample_bilinear(xs[x], centre_map(y, h, sh)))
}
