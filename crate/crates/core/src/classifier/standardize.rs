use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

/// Columns whose population standard deviation falls below this keep a unit
/// scale.
pub const MIN_SCALE: f64 = 1e-12;

/// Per-column affine map `(x - mean) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizerModel {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl StandardizerModel {
    pub fn width(&self) -> usize {
        self.mean.len()
    }
}

pub fn standardize_fit(x: &FeatureMatrix) -> Result<StandardizerModel> {
    if x.rows == 0 {
        return Err(Error::arg("cannot fit a standardizer on zero rows"));
    }
    let n = x.rows as f64;
    let mut mean = vec![0.0; x.cols];
    for row in x.iter_rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; x.cols];
    for row in x.iter_rows() {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let scale = var
        .into_iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd < MIN_SCALE {
                1.0
            } else {
                sd
            }
        })
        .collect();
    Ok(StandardizerModel { mean, scale })
}

pub fn standardize_apply(model: &StandardizerModel, x: &FeatureMatrix) -> Result<FeatureMatrix> {
    check_width(model, x)?;
    let mut out = x.clone();
    for i in 0..out.rows {
        for ((v, m), s) in out.row_mut(i).iter_mut().zip(&model.mean).zip(&model.scale) {
            *v = (*v - m) / s;
        }
    }
    Ok(out)
}

pub fn standardize_invert(model: &StandardizerModel, x: &FeatureMatrix) -> Result<FeatureMatrix> {
    check_width(model, x)?;
    let mut out = x.clone();
    for i in 0..out.rows {
        for ((v, m), s) in out.row_mut(i).iter_mut().zip(&model.mean).zip(&model.scale) {
            *v = *v * s + m;
        }
    }
    Ok(out)
}

fn check_width(model: &StandardizerModel, x: &FeatureMatrix) -> Result<()> {
    if x.cols != model.width() {
        return Err(Error::arg(format!(
            "{} columns supplied to a standardizer fitted on {}",
            x.cols,
            model.width()
        )));
    }
    Ok(())
}
