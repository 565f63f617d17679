//! Contrast-limited adaptive histogram equalization.
//!
//! Tile `t` of `g` along an axis of length `n` spans `[floor(t n / g),
//! floor((t + 1) n / g))`. Each tile histogram is clipped at
//! `clip_limit · tile_pixels / 256`, the clipped mass is spread evenly over
//! all bins, and the cumulative histogram becomes the tile's mapping. Pixels
//! are mapped by bilinear blending of the four nearest tile mappings.

use serde::{Deserialize, Serialize};

use super::GrayImage;
use crate::error::{Error, Result};

pub const CLAHE_BINS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClaheConfig {
    /// `[columns, rows]`.
    pub tile_grid: [usize; 2],
    /// Histogram clip level relative to a flat histogram. `f64::INFINITY`
    /// disables clipping.
    pub clip_limit: f64,
}

impl Default for ClaheConfig {
    fn default() -> Self {
        Self {
            tile_grid: [8, 8],
            clip_limit: 2.0,
        }
    }
}

impl ClaheConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tile_grid.contains(&0) {
            return Err(Error::Config("tile_grid entries must be positive".into()));
        }
        if !(self.clip_limit > 0.0) {
            return Err(Error::Config("clip_limit must be positive".into()));
        }
        Ok(())
    }
}

struct Axis {
    tiles: usize,
    /// Nominal tile length used to place tile centres.
    step: f64,
    bounds: Vec<usize>,
}

impl Axis {
    fn new(len: usize, requested: usize) -> Self {
        let tiles = requested.clamp(1, len.max(1));
        let bounds = (0..=tiles).map(|t| t * len / tiles).collect();
        Self {
            tiles,
            step: len as f64 / tiles as f64,
            bounds,
        }
    }

    /// Neighbouring tiles and the weight of the second one for pixel `i`.
    fn blend(&self, i: usize) -> (usize, usize, f64) {
        let pos = (i as f64 + 0.5) / self.step - 0.5;
        if pos <= 0.0 {
            return (0, 0, 0.0);
        }
        let t0 = (pos.floor() as usize).min(self.tiles - 1);
        if t0 + 1 >= self.tiles {
            return (t0, t0, 0.0);
        }
        (t0, t0 + 1, pos - t0 as f64)
    }
}

/// Apply CLAHE. Output stays within `[0, 255]`; a constant image maps to a
/// constant image.
pub fn clahe(img: &GrayImage, cfg: &ClaheConfig) -> GrayImage {
    if img.data.is_empty() {
        return img.clone();
    }
    let cols = Axis::new(img.width, cfg.tile_grid[0]);
    let rows = Axis::new(img.height, cfg.tile_grid[1]);

    let mut luts = Vec::with_capacity(rows.tiles * cols.tiles);
    for ty in 0..rows.tiles {
        for tx in 0..cols.tiles {
            let mut hist = [0f64; CLAHE_BINS];
            for r in rows.bounds[ty]..rows.bounds[ty + 1] {
                for &v in &img.row(r)[cols.bounds[tx]..cols.bounds[tx + 1]] {
                    hist[v as usize] += 1.0;
                }
            }
            luts.push(tile_mapping(&mut hist, cfg.clip_limit));
        }
    }

    let col_blend: Vec<_> = (0..img.width).map(|c| cols.blend(c)).collect();
    let mut data = Vec::with_capacity(img.data.len());
    for r in 0..img.height {
        let (y0, y1, fy) = rows.blend(r);
        for (c, &(x0, x1, fx)) in col_blend.iter().enumerate() {
            let v = img.get(r, c) as usize;
            let m = |ty: usize, tx: usize| luts[ty * cols.tiles + tx][v];
            let top = m(y0, x0) + fx * (m(y0, x1) - m(y0, x0));
            let bottom = m(y1, x0) + fx * (m(y1, x1) - m(y1, x0));
            let out = top + fy * (bottom - top);
            data.push(out.round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage {
        width: img.width,
        height: img.height,
        data,
    }
}

fn tile_mapping(hist: &mut [f64; CLAHE_BINS], clip_limit: f64) -> [f64; CLAHE_BINS] {
    let total: f64 = hist.iter().sum();
    let mut lut = [0.0; CLAHE_BINS];
    if total == 0.0 {
        return lut;
    }
    if clip_limit.is_finite() {
        let limit = clip_limit * total / CLAHE_BINS as f64;
        let mut excess = 0.0;
        for h in hist.iter_mut() {
            if *h > limit {
                excess += *h - limit;
                *h = limit;
            }
        }
        let share = excess / CLAHE_BINS as f64;
        for h in hist.iter_mut() {
            *h += share;
        }
    }
    let top = (CLAHE_BINS - 1) as f64;
    let mut cdf = 0.0;
    for (l, h) in lut.iter_mut().zip(hist.iter()) {
        cdf += h;
        *l = (cdf * top / total).min(top);
    }
    lut
}
