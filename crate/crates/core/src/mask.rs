//! Run-length encoded binary masks.
//!
//! Runs alternate background/foreground starting with background, in
//! row-major pixel order. A mask starting with foreground has a leading
//! zero-length background run. Runs sum to `width * height`.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MaskError {
    #[error("run lengths sum to {actual}, expected {expected}")]
    Length { expected: u64, actual: u64 },
    #[error("bitmap has {actual} pixels, expected {expected}")]
    Bitmap { expected: usize, actual: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawRle")]
pub struct Rle {
    width: u32,
    height: u32,
    counts: Vec<u32>,
}

#[derive(Deserialize)]
struct RawRle {
    width: u32,
    height: u32,
    counts: Vec<u32>,
}

impl TryFrom<RawRle> for Rle {
    type Error = MaskError;

    fn try_from(raw: RawRle) -> Result<Self, Self::Error> {
        Rle::from_counts(raw.width, raw.height, raw.counts)
    }
}

impl Rle {
    /// Wraps raw run lengths, normalizing interior zero runs away.
    pub fn from_counts(width: u32, height: u32, counts: Vec<u32>) -> Result<Self, MaskError> {
        let expected = u64::from(width) * u64::from(height);
        let actual: u64 = counts.iter().map(|&c| u64::from(c)).sum();
        if actual != expected {
            return Err(MaskError::Length { expected, actual });
        }
        // Re-encode so equal masks compare equal regardless of how the
        // producer split its runs.
        let mut bits = Vec::with_capacity(expected as usize);
        let mut fg = false;
        for &c in &counts {
            bits.extend(core::iter::repeat_n(fg, c as usize));
            fg = !fg;
        }
        Self::from_bits(width, height, &bits)
    }

    pub fn from_bits(width: u32, height: u32, bits: &[bool]) -> Result<Self, MaskError> {
        let expected = width as usize * height as usize;
        if bits.len() != expected {
            return Err(MaskError::Bitmap {
                expected,
                actual: bits.len(),
            });
        }
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0u32;
        for &b in bits {
            if b == current {
                run += 1;
            } else {
                counts.push(run);
                current = b;
                run = 1;
            }
        }
        if run > 0 || counts.is_empty() {
            counts.push(run);
        }
        Ok(Self {
            width,
            height,
            counts,
        })
    }

    /// Filled axis-aligned rectangle `[u0, u1) x [v0, v1)`, clipped to the
    /// mask bounds.
    pub fn rectangle(width: u32, height: u32, rect: [u32; 4]) -> Self {
        let [u0, v0, u1, v1] = rect;
        let mut bits = alloc::vec![false; width as usize * height as usize];
        for v in v0.min(height)..v1.min(height) {
            for u in u0.min(width)..u1.min(width) {
                bits[(v * width + u) as usize] = true;
            }
        }
        Self::from_bits(width, height, &bits).expect("sized bitmap")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn to_bits(&self) -> Vec<bool> {
        let mut bits = Vec::with_capacity(self.width as usize * self.height as usize);
        let mut fg = false;
        for &c in &self.counts {
            bits.extend(core::iter::repeat_n(fg, c as usize));
            fg = !fg;
        }
        bits
    }

    /// Row-major indices of foreground pixels.
    pub fn foreground(&self) -> impl Iterator<Item = usize> + '_ {
        let mut start = 0usize;
        self.counts.iter().enumerate().flat_map(move |(i, &c)| {
            let begin = start;
            start += c as usize;
            if i % 2 == 1 {
                begin..begin + c as usize
            } else {
                0..0
            }
        })
    }

    /// Foreground pixels as `(u, v)`.
    pub fn foreground_pixels(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width as usize;
        self.foreground()
            .map(move |i| ((i % w) as u32, (i / w) as u32))
    }

    pub fn count_ones(&self) -> usize {
        self.counts
            .iter()
            .skip(1)
            .step_by(2)
            .map(|&c| c as usize)
            .sum()
    }

    /// True when every foreground pixel lies in the half-open box.
    pub fn within_box(&self, bbox: [u32; 4]) -> bool {
        let [u0, v0, u1, v1] = bbox;
        self.foreground_pixels()
            .all(|(u, v)| u >= u0 && u < u1 && v >= v0 && v < v1)
    }

    pub fn full(width: u32, height: u32) -> Self {
        Self::rectangle(width, height, [0, 0, width, height])
    }
}

/// Segmentation output for one detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMask {
    pub rle: Rle,
    pub label: String,
    pub instance_name: Option<String>,
}

impl BinaryMask {
    pub fn width(&self) -> u32 {
        self.rle.width()
    }

    pub fn height(&self) -> u32 {
        self.rle.height()
    }
}
