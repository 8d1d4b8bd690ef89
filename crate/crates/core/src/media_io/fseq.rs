//! FSEQ container.
//!
//! Little-endian layout:
//!
//! | offset | type    | field                                          |
//! |--------|---------|------------------------------------------------|
//! | 0      | [u8; 4] | magic `FSQ1`                                   |
//! | 4      | u32     | width                                          |
//! | 8      | u32     | height                                         |
//! | 12     | u32     | frame_count                                    |
//! | 16     | u32     | channel_type (0 u8 gray, 1 f32 gray, 2 f32 uv) |
//! | 20     | ...     | frames, row-major, top-left origin             |
//!
//! Flow frames store `u` then `v` for each pixel.

use std::fs;
use std::path::Path;

use super::{MediaError, DEFAULT_FRAME_RATE};
use crate::flow::FlowField;
use crate::image::GrayImage;

pub const FSEQ_MAGIC: &[u8; 4] = b"FSQ1";
pub const FSEQ_HEADER_LEN: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u32)]
pub enum ChannelType {
    Gray8 = 0,
    GrayF32 = 1,
    FlowF32 = 2,
}

impl ChannelType {
    fn from_u32(raw: u32) -> Option<Self> {
        match raw {
            0 => Some(ChannelType::Gray8),
            1 => Some(ChannelType::GrayF32),
            2 => Some(ChannelType::FlowF32),
            _ => None,
        }
    }

    fn bytes_per_pixel(self) -> usize {
        match self {
            ChannelType::Gray8 => 1,
            ChannelType::GrayF32 => 4,
            ChannelType::FlowF32 => 8,
        }
    }
}

/// Ordered grayscale frames with intensities in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    width: usize,
    height: usize,
    pub frame_rate: f64,
    frames: Vec<GrayImage>,
}

impl FrameSequence {
    /// Validates shared geometry and the `[0, 1]` intensity range.
    pub fn new(width: usize, height: usize, frames: Vec<GrayImage>) -> Result<Self, MediaError> {
        check_dims(width, height)?;
        for (t, frame) in frames.iter().enumerate() {
            check_unit_image(t, frame, width, height)?;
        }
        Ok(Self {
            width,
            height,
            frame_rate: DEFAULT_FRAME_RATE,
            frames,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn frames(&self) -> &[GrayImage] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn into_frames(self) -> Vec<GrayImage> {
        self.frames
    }
}

/// Per-frame saliency maps with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SaliencySequence {
    width: usize,
    height: usize,
    maps: Vec<GrayImage>,
}

impl SaliencySequence {
    pub fn new(width: usize, height: usize, maps: Vec<GrayImage>) -> Result<Self, MediaError> {
        check_dims(width, height)?;
        for (t, map) in maps.iter().enumerate() {
            check_unit_image(t, map, width, height)?;
        }
        Ok(Self {
            width,
            height,
            maps,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn maps(&self) -> &[GrayImage] {
        &self.maps
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }
}

impl From<SaliencySequence> for FrameSequence {
    fn from(seq: SaliencySequence) -> Self {
        FrameSequence {
            width: seq.width,
            height: seq.height,
            frame_rate: DEFAULT_FRAME_RATE,
            frames: seq.maps,
        }
    }
}

/// Consecutive-pair flow fields; field `k` maps frame `k` onto frame `k + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowSequence {
    width: usize,
    height: usize,
    fields: Vec<FlowField>,
}

impl FlowSequence {
    pub fn new(width: usize, height: usize, fields: Vec<FlowField>) -> Result<Self, MediaError> {
        check_dims(width, height)?;
        for (t, field) in fields.iter().enumerate() {
            if field.dims() != (width, height) {
                return Err(MediaError::InvariantViolation {
                    frame: t,
                    reason: format!(
                        "flow is {}x{}, sequence is {width}x{height}",
                        field.width(),
                        field.height()
                    ),
                });
            }
            if !field.is_finite() {
                return Err(MediaError::InvariantViolation {
                    frame: t,
                    reason: "non-finite flow component".into(),
                });
            }
        }
        Ok(Self {
            width,
            height,
            fields,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn fields(&self) -> &[FlowField] {
        &self.fields
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }
}

/// Decoded FSEQ contents; the variant records the stored channel type.
#[derive(Clone, Debug, PartialEq)]
pub enum FseqPayload {
    Gray8(FrameSequence),
    GrayF32(FrameSequence),
    Flow(FlowSequence),
}

impl FseqPayload {
    pub fn channel_type(&self) -> ChannelType {
        match self {
            FseqPayload::Gray8(_) => ChannelType::Gray8,
            FseqPayload::GrayF32(_) => ChannelType::GrayF32,
            FseqPayload::Flow(_) => ChannelType::FlowF32,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            FseqPayload::Gray8(_) => "u8 gray",
            FseqPayload::GrayF32(_) => "f32 gray",
            FseqPayload::Flow(_) => "f32 flow",
        }
    }
}

fn check_dims(width: usize, height: usize) -> Result<(), MediaError> {
    if width == 0 || height == 0 {
        return Err(MediaError::InvalidHeader(format!(
            "zero geometry {width}x{height}"
        )));
    }
    if u32::try_from(width).is_err() || u32::try_from(height).is_err() {
        return Err(MediaError::InvalidHeader(format!(
            "geometry {width}x{height} exceeds u32"
        )));
    }
    Ok(())
}

fn check_unit_image(
    t: usize,
    img: &GrayImage,
    width: usize,
    height: usize,
) -> Result<(), MediaError> {
    if img.dims() != (width, height) {
        return Err(MediaError::InvariantViolation {
            frame: t,
            reason: format!(
                "frame is {}x{}, sequence is {width}x{height}",
                img.width(),
                img.height()
            ),
        });
    }
    if let Some(bad) = img.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(MediaError::InvariantViolation {
            frame: t,
            reason: format!("intensity {bad} outside [0, 1]"),
        });
    }
    Ok(())
}

fn put_u32(out: &mut Vec<u8>, value: usize) {
    out.extend_from_slice(&(value as u32).to_le_bytes());
}

/// Serializes a payload to the exact FSEQ byte layout.
///
/// 8-bit payloads store `round(255 * value)`.
pub fn encode_fseq(payload: &FseqPayload) -> Vec<u8> {
    let (width, height, count) = match payload {
        FseqPayload::Gray8(s) | FseqPayload::GrayF32(s) => (s.width, s.height, s.len()),
        FseqPayload::Flow(s) => (s.width, s.height, s.len()),
    };
    let kind = payload.channel_type();
    let mut out =
        Vec::with_capacity(FSEQ_HEADER_LEN + width * height * count * kind.bytes_per_pixel());
    out.extend_from_slice(FSEQ_MAGIC);
    put_u32(&mut out, width);
    put_u32(&mut out, height);
    put_u32(&mut out, count);
    out.extend_from_slice(&(kind as u32).to_le_bytes());
    match payload {
        FseqPayload::Gray8(seq) => {
            for frame in &seq.frames {
                out.extend(frame.data().iter().map(|&v| (v * 255.0).round() as u8));
            }
        }
        FseqPayload::GrayF32(seq) => {
            for frame in &seq.frames {
                for v in frame.data() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        FseqPayload::Flow(seq) => {
            for field in &seq.fields {
                for (u, v) in field.u().iter().zip(field.v()) {
                    out.extend_from_slice(&u.to_le_bytes());
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
    }
    out
}

fn read_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

fn f32_at(bytes: &[u8], i: usize) -> f32 {
    f32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap())
}

/// Parses an in-memory FSEQ image.
pub fn decode_fseq(bytes: &[u8]) -> Result<FseqPayload, MediaError> {
    if bytes.len() < 4 || &bytes[..4] != FSEQ_MAGIC {
        return Err(MediaError::MagicMismatch);
    }
    if bytes.len() < FSEQ_HEADER_LEN {
        return Err(MediaError::TruncatedPayload {
            expected: FSEQ_HEADER_LEN,
            actual: bytes.len(),
        });
    }
    let width = read_u32(bytes, 4) as usize;
    let height = read_u32(bytes, 8) as usize;
    let count = read_u32(bytes, 12) as usize;
    let raw_kind = read_u32(bytes, 16);
    let kind = ChannelType::from_u32(raw_kind)
        .ok_or_else(|| MediaError::InvalidHeader(format!("unknown channel_type {raw_kind}")))?;
    check_dims(width, height)?;

    let frame_bytes = width
        .checked_mul(height)
        .and_then(|px| px.checked_mul(kind.bytes_per_pixel()))
        .ok_or_else(|| MediaError::InvalidHeader("frame size overflows".into()))?;
    let payload = &bytes[FSEQ_HEADER_LEN..];
    let expected = frame_bytes
        .checked_mul(count)
        .ok_or_else(|| MediaError::InvalidHeader("payload size overflows".into()))?;
    if payload.len() != expected {
        return Err(MediaError::TruncatedPayload {
            expected,
            actual: payload.len(),
        });
    }

    let pixels = width * height;
    let chunks = payload.chunks_exact(frame_bytes.max(1)).take(count);
    match kind {
        ChannelType::Gray8 => {
            let frames = chunks
                .map(|chunk| {
                    let data = chunk.iter().map(|&b| b as f32 / 255.0).collect();
                    GrayImage::from_vec(width, height, data).unwrap()
                })
                .collect();
            FrameSequence::new(width, height, frames).map(FseqPayload::Gray8)
        }
        ChannelType::GrayF32 => {
            let frames = chunks
                .map(|chunk| {
                    let data = (0..pixels).map(|i| f32_at(chunk, i)).collect();
                    GrayImage::from_vec(width, height, data).unwrap()
                })
                .collect();
            FrameSequence::new(width, height, frames).map(FseqPayload::GrayF32)
        }
        ChannelType::FlowF32 => {
            let fields = chunks
                .map(|chunk| {
                    let u = (0..pixels).map(|i| f32_at(chunk, 2 * i)).collect();
                    let v = (0..pixels).map(|i| f32_at(chunk, 2 * i + 1)).collect();
                    FlowField::from_components(width, height, u, v).unwrap()
                })
                .collect();
            FlowSequence::new(width, height, fields).map(FseqPayload::Flow)
        }
    }
}

pub fn read_fseq(path: impl AsRef<Path>) -> Result<FseqPayload, MediaError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| MediaError::io(path, e))?;
    decode_fseq(&bytes)
}

pub fn write_fseq(payload: &FseqPayload, path: impl AsRef<Path>) -> Result<(), MediaError> {
    let path = path.as_ref();
    fs::write(path, encode_fseq(payload)).map_err(|e| MediaError::io(path, e))
}

/// Reads a gray payload of either precision as video frames.
pub fn read_frames(path: impl AsRef<Path>) -> Result<FrameSequence, MediaError> {
    match read_fseq(path)? {
        FseqPayload::Gray8(seq) | FseqPayload::GrayF32(seq) => Ok(seq),
        other => Err(MediaError::WrongPayload {
            expected: "gray",
            found: other.kind(),
        }),
    }
}

pub fn read_saliency(path: impl AsRef<Path>) -> Result<SaliencySequence, MediaError> {
    let seq = read_frames(path)?;
    Ok(SaliencySequence {
        width: seq.width,
        height: seq.height,
        maps: seq.frames,
    })
}

pub fn read_flow(path: impl AsRef<Path>) -> Result<FlowSequence, MediaError> {
    match read_fseq(path)? {
        FseqPayload::Flow(seq) => Ok(seq),
        other => Err(MediaError::WrongPayload {
            expected: "f32 flow",
            found: other.kind(),
        }),
    }
}
