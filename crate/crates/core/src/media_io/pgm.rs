//! Binary PGM (P5) frame directories. Binary PPM (P6) frames are accepted as
//! well and reduced to luma `0.299 R + 0.587 G + 0.114 B`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::{FrameSequence, MediaError};
use crate::image::GrayImage;

const PREFIX: &str = "frame_";
const DIGITS: usize = 6;

fn frame_index(name: &str) -> Option<usize> {
    let stem = name
        .strip_suffix(".pgm")
        .or_else(|| name.strip_suffix(".ppm"))?;
    let digits = stem.strip_prefix(PREFIX)?;
    if digits.len() != DIGITS || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Loads `frame_%06d.pgm` files from `dir` in index order.
pub fn read_pgm_sequence(dir: impl AsRef<Path>) -> Result<FrameSequence, MediaError> {
    let dir = dir.as_ref();
    let mut indexed: BTreeMap<usize, PathBuf> = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| MediaError::io(dir, e))? {
        let entry = entry.map_err(|e| MediaError::io(dir, e))?;
        let name = entry.file_name();
        if let Some(index) = name.to_str().and_then(frame_index) {
            indexed.insert(index, entry.path());
        }
    }
    for (expected, &index) in indexed.keys().enumerate() {
        if index != expected {
            return Err(MediaError::MissingIndex {
                dir: dir.to_path_buf(),
                index: expected,
            });
        }
    }

    let mut frames = Vec::with_capacity(indexed.len());
    for path in indexed.values() {
        let bytes = fs::read(path).map_err(|e| MediaError::io(path, e))?;
        frames.push(decode_pnm(&bytes, path)?);
    }
    let Some(first) = frames.first() else {
        return Err(MediaError::InvalidHeader(format!(
            "no frame_NNNNNN.pgm files in {}",
            dir.display()
        )));
    };
    let (w, h) = first.dims();
    FrameSequence::new(w, h, frames)
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self) -> Option<usize> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()?
            .parse()
            .ok()
    }
}

/// Decodes one P5/P6 image; `path` is only used for error messages.
pub fn decode_pnm(bytes: &[u8], path: &Path) -> Result<GrayImage, MediaError> {
    let unsupported = |reason: &str| MediaError::UnsupportedPgm {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        Some(b"P2") | Some(b"P3") => return Err(unsupported("ASCII PNM is not supported")),
        _ => return Err(unsupported("not a binary PGM/PPM")),
    };
    let mut header = Header { bytes, pos: 2 };
    let width = header.number().ok_or_else(|| unsupported("bad width"))?;
    let height = header.number().ok_or_else(|| unsupported("bad height"))?;
    let maxval = header.number().ok_or_else(|| unsupported("bad maxval"))?;
    if maxval != 255 {
        return Err(unsupported(&format!("maxval {maxval}, only 255 is supported")));
    }
    if width == 0 || height == 0 {
        return Err(unsupported("zero geometry"));
    }
    // exactly one whitespace byte separates the header from the raster
    let start = header.pos + 1;
    let len = width * height * channels;
    let raster = bytes
        .get(start..start + len)
        .ok_or_else(|| unsupported("raster shorter than header declares"))?;
    let data = if channels == 1 {
        raster.iter().map(|&b| b as f32 / 255.0).collect()
    } else {
        raster
            .chunks_exact(3)
            .map(|px| {
                let luma = 0.299 * px[0] as f32 + 0.587 * px[1] as f32 + 0.114 * px[2] as f32;
                (luma / 255.0).clamp(0.0, 1.0)
            })
            .collect()
    };
    Ok(GrayImage::from_vec(width, height, data).unwrap())
}

/// Writes an 8-bit P5 file, rounding intensities to the nearest level.
pub fn write_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<(), MediaError> {
    let path = path.as_ref();
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(
        img.data()
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    fs::write(path, out).map_err(|e| MediaError::io(path, e))
}
