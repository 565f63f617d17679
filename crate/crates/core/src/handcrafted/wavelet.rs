//! Orthonormal Haar 2-D DWT with the usual subband naming: `horizontal`
//! holds detail along rows-axis (vertical differences), `vertical` detail
//! along the column axis, `diagonal` detail along both. Odd lengths are
//! extended by repeating the edge sample (half-point symmetric extension).

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::Result;
use crate::preprocess::GrayImage;
use crate::stats::{compute_stats, NUM_STATS};

#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn from_image(img: &GrayImage) -> Self {
        Self {
            width: img.width,
            height: img.height,
            data: img.data.iter().map(|&v| v as f64).collect(),
        }
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subbands {
    pub approx: Plane,
    pub horizontal: Plane,
    pub vertical: Plane,
    pub diagonal: Plane,
}

impl Subbands {
    /// Subbands in (A, H, V, D) order.
    pub fn planes(&self) -> [&Plane; 4] {
        [&self.approx, &self.horizontal, &self.vertical, &self.diagonal]
    }
}

/// One-level Haar analysis of a sequence: `(a, d)` with
/// `a = (x0 + x1)/√2`, `d = (x0 - x1)/√2`.
fn haar_1d(x: &[f64], approx: &mut Vec<f64>, detail: &mut Vec<f64>) {
    approx.clear();
    detail.clear();
    for pair in x.chunks(2) {
        let x0 = pair[0];
        let x1 = *pair.get(1).unwrap_or(&x0);
        approx.push((x0 + x1) * FRAC_1_SQRT_2);
        detail.push((x0 - x1) * FRAC_1_SQRT_2);
    }
}

/// Transform every row; returns the (low, high) halves.
fn along_rows(p: &Plane) -> (Plane, Plane) {
    let out_w = p.width.div_ceil(2);
    let mut low = Vec::with_capacity(out_w * p.height);
    let mut high = Vec::with_capacity(out_w * p.height);
    let (mut a, mut d) = (Vec::new(), Vec::new());
    for row in p.data.chunks_exact(p.width) {
        haar_1d(row, &mut a, &mut d);
        low.extend_from_slice(&a);
        high.extend_from_slice(&d);
    }
    let mk = |data| Plane {
        width: out_w,
        height: p.height,
        data,
    };
    (mk(low), mk(high))
}

fn transpose(p: &Plane) -> Plane {
    let mut data = vec![0.0; p.data.len()];
    for r in 0..p.height {
        for c in 0..p.width {
            data[c * p.height + r] = p.data[r * p.width + c];
        }
    }
    Plane {
        width: p.height,
        height: p.width,
        data,
    }
}

/// Along the row index (vertical direction).
fn along_columns(p: &Plane) -> (Plane, Plane) {
    let (low, high) = along_rows(&transpose(p));
    (transpose(&low), transpose(&high))
}

pub fn haar_dwt2(p: &Plane) -> Subbands {
    let (col_low, col_high) = along_columns(p);
    let (approx, vertical) = along_rows(&col_low);
    let (horizontal, diagonal) = along_rows(&col_high);
    Subbands {
        approx,
        horizontal,
        vertical,
        diagonal,
    }
}

/// Statistics of the four level-1 subbands followed by the four level-2
/// subbands (DWT of the level-1 approximation), each in A, H, V, D order.
pub fn wavelet_features(img: &GrayImage) -> Result<Vec<f64>> {
    let level1 = haar_dwt2(&Plane::from_image(img));
    let level2 = haar_dwt2(&level1.approx);
    let mut out = Vec::with_capacity(8 * NUM_STATS);
    for plane in level1.planes().into_iter().chain(level2.planes()) {
        out.extend(compute_stats(&plane.data)?.to_array());
    }
    Ok(out)
}
