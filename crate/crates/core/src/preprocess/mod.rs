//! Image loading and the two canonical views of every input: the
//! contrast-enhanced 224×224 grayscale image used for handcrafted features,
//! and the mean-centered three-channel tensor fed to the CNN backbone.

mod clahe;
mod loader;

pub use self::clahe::{clahe, ClaheConfig, CLAHE_BINS};
pub use self::loader::{load_image, to_grayscale, GrayImage, RawImage};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Side length of the canonical square image.
pub const CANONICAL_SIZE: usize = 224;

/// Per-channel centering constants in B, G, R order.
pub const IMAGENET_BGR_MEANS: [f64; 3] = [103.939, 116.779, 123.68];

/// Preprocessing settings as they appear in the run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    /// CLAHE tile grid as `[columns, rows]`.
    pub tile_grid: [usize; 2],
    pub clip_limit: f64,
    /// Centering constants in B, G, R order.
    pub means: [f64; 3],
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        let clahe = ClaheConfig::default();
        Self {
            tile_grid: clahe.tile_grid,
            clip_limit: clahe.clip_limit,
            means: IMAGENET_BGR_MEANS,
        }
    }
}

impl PreprocessConfig {
    pub fn clahe(&self) -> ClaheConfig {
        ClaheConfig {
            tile_grid: self.tile_grid,
            clip_limit: self.clip_limit,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.clahe().validate()?;
        if self.means.iter().any(|m| !m.is_finite()) {
            return Err(Error::Config("preprocess.means must be finite".into()));
        }
        Ok(())
    }
}

/// Three identical channels of centered intensities, stored row-major as
/// height × width × channel with channels in B, G, R order. No scaling is
/// applied: `value = pixel - mean[channel]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredRgbTensor {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl CenteredRgbTensor {
    pub fn get(&self, row: usize, col: usize, channel: usize) -> f32 {
        self.data[(row * self.width + col) * 3 + channel]
    }

    /// Channel-first (C × H × W) copy of the data.
    pub fn to_chw(&self) -> Vec<f32> {
        let plane = self.width * self.height;
        let mut out = vec![0.0; plane * 3];
        for (i, px) in self.data.chunks_exact(3).enumerate() {
            for c in 0..3 {
                out[c * plane + i] = px[c];
            }
        }
        out
    }
}

/// Duplicate the grayscale plane into three channels and subtract the
/// per-channel means.
pub fn to_model_input(img: &GrayImage, means: [f64; 3]) -> CenteredRgbTensor {
    let mut data = Vec::with_capacity(img.data.len() * 3);
    for &p in &img.data {
        for m in means {
            data.push((p as f64 - m) as f32);
        }
    }
    CenteredRgbTensor {
        width: img.width,
        height: img.height,
        data,
    }
}

/// Bilinear resize with half-pixel-centered sampling; results are rounded to
/// the nearest integer.
pub fn resize_bilinear(img: &GrayImage, width: usize, height: usize) -> Result<GrayImage> {
    if img.width == 0 || img.height == 0 || width == 0 || height == 0 {
        return Err(Error::arg("cannot resize an image with a zero dimension"));
    }
    let xs = sample_axis(img.width, width);
    let ys = sample_axis(img.height, height);
    let mut data = Vec::with_capacity(width * height);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let p = |r: usize, c: usize| img.data[r * img.width + c] as f64;
            let top = p(y0, x0) + fx * (p(y0, x1) - p(y0, x0));
            let bottom = p(y1, x0) + fx * (p(y1, x1) - p(y1, x0));
            let v = top + fy * (bottom - top);
            data.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    Ok(GrayImage {
        width,
        height,
        data,
    })
}

/// For each destination index: the two source neighbours and the weight of
/// the second.
fn sample_axis(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

/// Load → grayscale → resize to 224×224 → CLAHE, then build the centered
/// tensor from the enhanced image.
pub fn preprocess_image(
    path: impl AsRef<Path>,
    cfg: &PreprocessConfig,
) -> Result<(GrayImage, CenteredRgbTensor)> {
    let raw = load_image(path)?;
    let gray = to_grayscale(&raw);
    let resized = resize_bilinear(&gray, CANONICAL_SIZE, CANONICAL_SIZE)?;
    let enhanced = clahe(&resized, &cfg.clahe());
    let tensor = to_model_input(&enhanced, cfg.means);
    Ok((enhanced, tensor))
}
