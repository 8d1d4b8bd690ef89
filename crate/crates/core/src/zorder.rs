//! Quantization of feature vectors and Z-order (Morton) interleaving.
//!
//! Bit `j` of dimension `d` lands on bit `j·D + d` of the code, so dimension 0
//! is the least significant within every group of `D` bits.

use serde::{Deserialize, Serialize};

use crate::features::Variant;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ZorderError {
    #[error("invalid quantizer: {0}")]
    InvalidQuantizer(String),
    #[error("coordinate {value} of dimension {dim} does not fit in {bits} bits")]
    CoordOverflow { dim: usize, value: u64, bits: u32 },
    #[error("code {code} exceeds {total_bits} bits")]
    CodeOverflow { code: u64, total_bits: u32 },
    #[error("expected {expected} coordinates, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// One code per frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MortonRecord {
    pub frame: usize,
    pub code: u64,
}

fn check_shape(dims: usize, bits: u32) -> Result<(), ZorderError> {
    if dims == 0 || bits == 0 || dims as u64 * u64::from(bits) > 64 {
        return Err(ZorderError::InvalidQuantizer(format!(
            "need D >= 1, B >= 1 and B·D <= 64, got D={dims} B={bits}"
        )));
    }
    Ok(())
}

fn max_level(bits: u32) -> u64 {
    if bits == 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

/// Maps `value` from `[lo, hi]` to `0..=2^bits - 1`, clamping outside values
/// and rounding half away from zero.
pub fn quantize(value: f64, lo: f64, hi: f64, bits: u32) -> u64 {
    let top = max_level(bits) as f64;
    let t = (value.clamp(lo, hi) - lo) / (hi - lo);
    // NaN saturates to 0 in the cast
    (t * top).round() as u64
}

/// Inverse of [`quantize`] up to the quantization step.
pub fn dequantize(level: u64, lo: f64, hi: f64, bits: u32) -> f64 {
    lo + level as f64 / max_level(bits) as f64 * (hi - lo)
}

pub fn morton_encode(coords: &[u64], bits: u32) -> Result<u64, ZorderError> {
    let dims = coords.len();
    check_shape(dims, bits)?;
    let limit = max_level(bits);
    let mut code = 0u64;
    for (d, &c) in coords.iter().enumerate() {
        if c > limit {
            return Err(ZorderError::CoordOverflow { dim: d, value: c, bits });
        }
        for j in 0..bits as usize {
            code |= ((c >> j) & 1) << (j * dims + d);
        }
    }
    Ok(code)
}

pub fn morton_decode(code: u64, dims: usize, bits: u32) -> Result<Vec<u64>, ZorderError> {
    check_shape(dims, bits)?;
    let total_bits = dims as u32 * bits;
    if total_bits < 64 && code >> total_bits != 0 {
        return Err(ZorderError::CodeOverflow { code, total_bits });
    }
    let mut coords = vec![0u64; dims];
    for (d, c) in coords.iter_mut().enumerate() {
        for j in 0..bits as usize {
            *c |= ((code >> (j * dims + d)) & 1) << j;
        }
    }
    Ok(coords)
}

/// Per-dimension value ranges and bit depth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quantizer {
    ranges: Vec<(f64, f64)>,
    bits: u32,
}

impl Quantizer {
    pub fn new(ranges: Vec<(f64, f64)>, bits: u32) -> Result<Self, ZorderError> {
        check_shape(ranges.len(), bits)?;
        if let Some((d, r)) = ranges
            .iter()
            .enumerate()
            .find(|(_, (lo, hi))| !(lo.is_finite() && hi.is_finite() && lo < hi))
        {
            return Err(ZorderError::InvalidQuantizer(format!(
                "dimension {d}: range {r:?} must satisfy lo < hi"
            )));
        }
        Ok(Self { ranges, bits })
    }

    /// Six dimensions over the value range the variant's features occupy:
    /// degrees for flow, unit interval for saliency.
    pub fn for_variant(variant: Variant, bits: u32) -> Result<Self, ZorderError> {
        let range = match variant {
            Variant::Of => (0.0, 180.0),
            Variant::Cnn => (0.0, 1.0),
        };
        Self::new(vec![range; 6], bits)
    }

    pub fn dims(&self) -> usize {
        self.ranges.len()
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn ranges(&self) -> &[(f64, f64)] {
        &self.ranges
    }

    pub fn quantize(&self, values: &[f32]) -> Result<Vec<u64>, ZorderError> {
        self.check_len(values.len())?;
        Ok(values
            .iter()
            .zip(&self.ranges)
            .map(|(&v, &(lo, hi))| quantize(f64::from(v), lo, hi, self.bits))
            .collect())
    }

    pub fn encode(&self, values: &[f32]) -> Result<u64, ZorderError> {
        morton_encode(&self.quantize(values)?, self.bits)
    }

    pub fn decode_levels(&self, code: u64) -> Result<Vec<u64>, ZorderError> {
        morton_decode(code, self.dims(), self.bits)
    }

    pub fn dequantize(&self, levels: &[u64]) -> Result<Vec<f64>, ZorderError> {
        self.check_len(levels.len())?;
        Ok(levels
            .iter()
            .zip(&self.ranges)
            .map(|(&l, &(lo, hi))| dequantize(l, lo, hi, self.bits))
            .collect())
    }

    fn check_len(&self, found: usize) -> Result<(), ZorderError> {
        if found != self.dims() {
            return Err(ZorderError::DimensionMismatch {
                expected: self.dims(),
                found,
            });
        }
        Ok(())
    }
}
