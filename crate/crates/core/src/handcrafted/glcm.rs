use crate::error::Result;
use crate::preprocess::GrayImage;
use crate::stats::{compute_stats, NUM_STATS};

pub const GRAY_LEVELS: usize = 256;

/// Co-occurrence directions at offset 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlcmDirection {
    Deg0,
    Deg45,
    Deg90,
    Deg135,
}

impl GlcmDirection {
    pub const ALL: [GlcmDirection; 4] = [
        GlcmDirection::Deg0,
        GlcmDirection::Deg45,
        GlcmDirection::Deg90,
        GlcmDirection::Deg135,
    ];

    /// `(row, col)` displacement of the paired pixel.
    pub fn offset(self) -> (isize, isize) {
        match self {
            GlcmDirection::Deg0 => (0, 1),
            GlcmDirection::Deg45 => (-1, 1),
            GlcmDirection::Deg90 => (-1, 0),
            GlcmDirection::Deg135 => (-1, -1),
        }
    }

    pub fn degrees(self) -> u32 {
        match self {
            GlcmDirection::Deg0 => 0,
            GlcmDirection::Deg45 => 45,
            GlcmDirection::Deg90 => 90,
            GlcmDirection::Deg135 => 135,
        }
    }
}

/// Raw (unsymmetrized, unnormalized) 256×256 co-occurrence counts.
/// `counts[a * 256 + b]` counts pixels of level `a` whose displaced
/// neighbour has level `b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlcmMatrix {
    pub counts: Vec<u32>,
}

impl GlcmMatrix {
    pub fn get(&self, a: u8, b: u8) -> u32 {
        self.counts[a as usize * GRAY_LEVELS + b as usize]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }
}

/// Rows/cols `i` such that `i + d` stays inside `0..len`.
pub(crate) fn valid_range(len: usize, d: isize) -> std::ops::Range<usize> {
    let lo = (-d).max(0) as usize;
    let hi = (len as isize - d.max(0)).max(lo as isize) as usize;
    lo..hi.min(len).max(lo)
}

pub fn glcm_matrix(img: &GrayImage, direction: GlcmDirection) -> GlcmMatrix {
    let (dr, dc) = direction.offset();
    let mut counts = vec![0u32; GRAY_LEVELS * GRAY_LEVELS];
    let cols = valid_range(img.width, dc);
    for r in valid_range(img.height, dr) {
        let src = img.row(r);
        let dst = img.row((r as isize + dr) as usize);
        for c in cols.clone() {
            let a = src[c] as usize;
            let b = dst[(c as isize + dc) as usize] as usize;
            counts[a * GRAY_LEVELS + b] += 1;
        }
    }
    GlcmMatrix { counts }
}

/// Statistics of each flattened direction plane, concatenated in
/// 0°, 45°, 90°, 135° order.
pub fn glcm_features(img: &GrayImage) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(4 * NUM_STATS);
    for dir in GlcmDirection::ALL {
        let m = glcm_matrix(img, dir);
        let flat: Vec<f64> = m.counts.iter().map(|&c| c as f64).collect();
        out.extend(compute_stats(&flat)?.to_array());
    }
    Ok(out)
}
