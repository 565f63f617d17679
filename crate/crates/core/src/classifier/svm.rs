//! One-vs-all linear SVM trained by dual coordinate descent.
//!
//! Each binary machine solves
//!
//! ```text
//! min_w  ½‖w‖² + C Σ max(0, 1 - y_i w·x̃_i)
//! ```
//!
//! where `x̃ = [x, 1]`, so the bias is the last (regularized) weight. The
//! dual `max_α Σα_i - ½‖Σ α_i y_i x̃_i‖²` subject to `0 ≤ α_i ≤ C` is
//! optimized one coordinate at a time in a seeded random order, and training
//! stops once the duality gap drops below `tol · max(1, primal)`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{ClassLabel, NUM_CLASSES};
use crate::matrix::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmTrainConfig {
    pub c: f64,
    pub tol: f64,
    /// Maximum number of passes over the data.
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SvmTrainConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            tol: 1e-4,
            max_iter: 10_000,
            seed: 0,
        }
    }
}

impl SvmTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config("svm.c must be positive".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config("svm.tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("svm.max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// A trained binary machine and its solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub epochs: usize,
    pub duality_gap: f64,
    pub converged: bool,
}

impl BinarySvm {
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }
}

/// Dual variables and per-epoch dual objective of one binary solve.
#[derive(Debug, Clone)]
pub struct BinaryTrace {
    pub alpha: Vec<f64>,
    pub dual_objective: Vec<f64>,
    pub primal_objective: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    /// Regularization constant the machines were trained with.
    pub c: f64,
    /// One machine per class, in [`ClassLabel::ALL`] order.
    pub machines: Vec<BinarySvm>,
}

impl SvmModel {
    pub fn width(&self) -> usize {
        self.machines[0].weights.len()
    }

    pub fn converged(&self) -> bool {
        self.machines.iter().all(|m| m.converged)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Train a single machine on labels `y ∈ {-1, +1}`.
pub fn train_binary(
    x: &FeatureMatrix,
    y: &[f64],
    cfg: &SvmTrainConfig,
    seed: u64,
) -> (BinarySvm, BinaryTrace) {
    let n = x.rows;
    let d = x.cols;
    let c = cfg.c;
    // Augmented weight vector; the last entry multiplies the constant 1.
    let mut w = vec![0.0; d + 1];
    let mut alpha = vec![0.0; n];
    let diag: Vec<f64> = x.iter_rows().map(|r| dot(r, r) + 1.0).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut trace = BinaryTrace {
        alpha: Vec::new(),
        dual_objective: Vec::new(),
        primal_objective: Vec::new(),
    };
    let mut epochs = 0;
    let mut gap = f64::INFINITY;
    let mut converged = false;

    while epochs < cfg.max_iter {
        order.shuffle(&mut rng);
        for &i in &order {
            let xi = x.row(i);
            let g = y[i] * (dot(&w[..d], xi) + w[d]) - 1.0;
            let a = alpha[i];
            let projected = if a == 0.0 {
                g.min(0.0)
            } else if a == c {
                g.max(0.0)
            } else {
                g
            };
            if projected == 0.0 {
                continue;
            }
            let updated = (a - g / diag[i]).clamp(0.0, c);
            let step = (updated - a) * y[i];
            alpha[i] = updated;
            for (wj, xj) in w[..d].iter_mut().zip(xi) {
                *wj += step * xj;
            }
            w[d] += step;
        }
        epochs += 1;

        let half_norm = 0.5 * dot(&w, &w);
        let dual = alpha.iter().sum::<f64>() - half_norm;
        let hinge: f64 = x
            .iter_rows()
            .zip(y)
            .map(|(r, &yi)| (1.0 - yi * (dot(&w[..d], r) + w[d])).max(0.0))
            .sum();
        let primal = half_norm + c * hinge;
        if let Some(&prev) = trace.dual_objective.last() {
            debug_assert!(
                dual >= prev - 1e-9 * prev.abs().max(1.0),
                "dual objective decreased: {prev} -> {dual}"
            );
        }
        trace.dual_objective.push(dual);
        trace.primal_objective.push(primal);
        gap = primal - dual;
        if gap <= cfg.tol * primal.abs().max(1.0) {
            converged = true;
            break;
        }
    }

    debug_assert!(alpha.iter().all(|&a| (0.0..=c).contains(&a)));
    trace.alpha = alpha;
    let bias = w.pop().unwrap_or(0.0);
    (
        BinarySvm {
            weights: w,
            bias,
            epochs,
            duality_gap: gap,
            converged,
        },
        trace,
    )
}

/// Fit one machine per class (class vs rest).
pub fn svm_fit(x: &FeatureMatrix, y: &[ClassLabel], cfg: &SvmTrainConfig) -> Result<SvmModel> {
    Ok(svm_fit_traced(x, y, cfg)?.0)
}

/// [`svm_fit`] that also returns the per-class solver traces.
pub fn svm_fit_traced(
    x: &FeatureMatrix,
    y: &[ClassLabel],
    cfg: &SvmTrainConfig,
) -> Result<(SvmModel, Vec<BinaryTrace>)> {
    cfg.validate()?;
    if x.rows != y.len() {
        return Err(Error::arg(format!(
            "{} rows but {} labels",
            x.rows,
            y.len()
        )));
    }
    if x.rows < 2 {
        return Err(Error::arg("SVM training needs at least two samples"));
    }
    if x.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("non-finite training feature"));
    }
    let mut present = [false; NUM_CLASSES];
    for l in y {
        present[l.index()] = true;
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::arg("training labels contain a single class"));
    }

    let results: Vec<(BinarySvm, BinaryTrace)> = ClassLabel::ALL
        .par_iter()
        .map(|&class| {
            let targets: Vec<f64> = y
                .iter()
                .map(|&l| if l == class { 1.0 } else { -1.0 })
                .collect();
            train_binary(x, &targets, cfg, cfg.seed.wrapping_add(class.index() as u64))
        })
        .collect();
    let (machines, traces) = results.into_iter().unzip();
    Ok((SvmModel { c: cfg.c, machines }, traces))
}

/// Scores `w_c·x + b_c` in class order.
pub fn svm_decision(model: &SvmModel, x: &[f64]) -> Result<[f64; NUM_CLASSES]> {
    if x.len() != model.width() {
        return Err(Error::arg(format!(
            "{} features supplied to an SVM of width {}",
            x.len(),
            model.width()
        )));
    }
    let mut out = [0.0; NUM_CLASSES];
    for (o, m) in out.iter_mut().zip(&model.machines) {
        *o = m.decision(x);
    }
    Ok(out)
}

/// Highest score wins; ties go to the earlier class.
pub fn argmax_label(scores: &[f64; NUM_CLASSES]) -> ClassLabel {
    let mut best = 0;
    for i in 1..NUM_CLASSES {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    ClassLabel::ALL[best]
}

pub fn svm_predict(model: &SvmModel, x: &FeatureMatrix) -> Result<Vec<ClassLabel>> {
    x.iter_rows()
        .map(|r| svm_decision(model, r).map(|s| argmax_label(&s)))
        .collect()
}
