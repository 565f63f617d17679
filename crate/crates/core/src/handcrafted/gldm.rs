use super::glcm::valid_range;
use crate::error::{Error, Result};
use crate::preprocess::GrayImage;
use crate::stats::{compute_stats, NUM_STATS};

/// Pixel distance of the difference pairs.
pub const GLDM_DISTANCE: isize = 10;
pub const GLDM_BINS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GldmDirection {
    Deg0,
    Deg90,
    Deg180,
    Deg270,
}

impl GldmDirection {
    pub const ALL: [GldmDirection; 4] = [
        GldmDirection::Deg0,
        GldmDirection::Deg90,
        GldmDirection::Deg180,
        GldmDirection::Deg270,
    ];

    pub fn offset(self) -> (isize, isize) {
        match self {
            GldmDirection::Deg0 => (0, GLDM_DISTANCE),
            GldmDirection::Deg90 => (-GLDM_DISTANCE, 0),
            GldmDirection::Deg180 => (0, -GLDM_DISTANCE),
            GldmDirection::Deg270 => (GLDM_DISTANCE, 0),
        }
    }

    pub fn degrees(self) -> u32 {
        match self {
            GldmDirection::Deg0 => 0,
            GldmDirection::Deg90 => 90,
            GldmDirection::Deg180 => 180,
            GldmDirection::Deg270 => 270,
        }
    }
}

/// Normalized histogram of absolute gray-level differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GldmHistogram {
    pub density: Vec<f64>,
    pub pairs: usize,
}

pub fn gldm_histogram(img: &GrayImage, direction: GldmDirection) -> Result<GldmHistogram> {
    let (dr, dc) = direction.offset();
    let rows = valid_range(img.height, dr);
    let cols = valid_range(img.width, dc);
    let pairs = rows.len() * cols.len();
    if pairs == 0 {
        return Err(Error::arg(format!(
            "{}x{} image too small for a {}-pixel displacement",
            img.width, img.height, GLDM_DISTANCE
        )));
    }
    let mut counts = [0u64; GLDM_BINS];
    for r in rows {
        let src = img.row(r);
        let dst = img.row((r as isize + dr) as usize);
        for c in cols.clone() {
            let b = dst[(c as isize + dc) as usize];
            counts[src[c].abs_diff(b) as usize] += 1;
        }
    }
    let p = pairs as f64;
    Ok(GldmHistogram {
        density: counts.iter().map(|&n| n as f64 / p).collect(),
        pairs,
    })
}

/// Statistics of each direction's histogram, concatenated in 0°, 90°, 180°,
/// 270° order.
pub fn gldm_features(img: &GrayImage) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(4 * NUM_STATS);
    for dir in GldmDirection::ALL {
        let h = gldm_histogram(img, dir)?;
        out.extend(compute_stats(&h.density)?.to_array());
    }
    Ok(out)
}
