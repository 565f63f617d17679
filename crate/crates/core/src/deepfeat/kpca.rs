//! Kernel PCA through the double-centred Gram matrix.
//!
//! Fitting forms the `n × n` kernel matrix of the training rows, centres it
//! in feature space, and keeps the leading eigenpairs whose eigenvalue
//! exceeds `1e-10 · λ_max` (at most `n - 1` of them). Training row `i`
//! scores `√λ_j · v_j[i]` on component `j`.
//!
//! For the linear kernel the fitted model collapses to a mean vector and a
//! `width × k` projection, so transforming new rows never needs the training
//! data.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

/// Relative eigenvalue cut-off.
pub const EIGEN_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum KernelSpec {
    Linear,
    /// `exp(-γ ‖x - y‖²)`; `gamma` defaults to `1 / width`.
    Rbf {
        #[serde(default)]
        gamma: Option<f64>,
    },
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::Linear
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kernel", rename_all = "lowercase")]
enum Projection {
    Linear {
        #[serde(with = "crate::codec::f64_base64")]
        mean: Vec<f64>,
        /// `width × k`, row-major.
        projection: FeatureMatrix,
    },
    Rbf {
        gamma: f64,
        references: FeatureMatrix,
        /// Per-reference mean of the training kernel matrix.
        #[serde(with = "crate::codec::f64_base64")]
        kernel_means: Vec<f64>,
        grand_mean: f64,
        /// `n_train × k`: eigenvectors scaled by `1/√λ`.
        coefficients: FeatureMatrix,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpcaModel {
    width: usize,
    /// Descending.
    eigenvalues: Vec<f64>,
    projection: Projection,
}

/// A fitted model together with the scores of its training rows.
#[derive(Debug, Clone)]
pub struct KpcaFit {
    pub model: KpcaModel,
    pub scores: FeatureMatrix,
}

impl KpcaModel {
    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of retained components.
    pub fn components(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn kernel(&self) -> KernelSpec {
        match &self.projection {
            Projection::Linear { .. } => KernelSpec::Linear,
            Projection::Rbf { gamma, .. } => KernelSpec::Rbf {
                gamma: Some(*gamma),
            },
        }
    }
}

/// Fit kernel PCA on the rows of `x`, keeping up to `k` components.
pub fn kpca_fit(x: &FeatureMatrix, k: usize, kernel: KernelSpec) -> Result<KpcaFit> {
    if k == 0 {
        return Err(Error::arg("kernel PCA needs at least one component"));
    }
    let n = x.rows;
    if n < 2 {
        return Err(Error::arg("kernel PCA needs at least two samples"));
    }
    if x.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("non-finite deep feature value"));
    }

    let (gram, mean, gamma) = match kernel {
        KernelSpec::Linear => {
            let mean = column_means(x);
            let centred = centred_columns(x, &mean);
            (centred.tr_mul(&centred), Some((mean, centred)), None)
        }
        KernelSpec::Rbf { gamma } => {
            let gamma = gamma.unwrap_or(1.0 / x.cols.max(1) as f64);
            if !(gamma > 0.0 && gamma.is_finite()) {
                return Err(Error::arg("rbf gamma must be positive"));
            }
            (rbf_gram(x, gamma), None, Some(gamma))
        }
    };

    let kernel_means: Vec<f64> = (0..n).map(|j| gram.column(j).mean()).collect();
    let grand_mean = kernel_means.iter().sum::<f64>() / n as f64;
    let centred_gram = DMatrix::from_fn(n, n, |i, j| {
        gram[(i, j)] - kernel_means[i] - kernel_means[j] + grand_mean
    });

    let (eigenvalues, vectors) = leading_eigenpairs(centred_gram, k.min(n - 1))?;
    let kept = eigenvalues.len();

    let mut scores = FeatureMatrix::zeros(n, kept);
    for j in 0..kept {
        let s = eigenvalues[j].sqrt();
        for i in 0..n {
            scores.data[i * kept + j] = s * vectors[(i, j)];
        }
    }

    let scaled = DMatrix::from_fn(n, kept, |i, j| vectors[(i, j)] / eigenvalues[j].sqrt());
    let projection = match (mean, gamma) {
        (Some((mean, centred)), _) => {
            // width × k, column-major in nalgebra; stored row-major.
            let p = &centred * &scaled;
            let mut data = Vec::with_capacity(p.len());
            for r in 0..p.nrows() {
                for c in 0..kept {
                    data.push(p[(r, c)]);
                }
            }
            Projection::Linear {
                mean,
                projection: FeatureMatrix::from_vec(x.cols, kept, data)?,
            }
        }
        (None, Some(gamma)) => {
            let mut coefficients = FeatureMatrix::zeros(n, kept);
            for i in 0..n {
                for j in 0..kept {
                    coefficients.data[i * kept + j] = scaled[(i, j)];
                }
            }
            Projection::Rbf {
                gamma,
                references: x.clone(),
                kernel_means,
                grand_mean,
                coefficients,
            }
        }
        (None, None) => unreachable!(),
    };

    Ok(KpcaFit {
        model: KpcaModel {
            width: x.cols,
            eigenvalues,
            projection,
        },
        scores,
    })
}

/// Project new rows onto the fitted components.
pub fn kpca_transform(model: &KpcaModel, x: &FeatureMatrix) -> Result<FeatureMatrix> {
    if x.cols != model.width {
        return Err(Error::arg(format!(
            "deep features have {} columns, model was fitted on {}",
            x.cols, model.width
        )));
    }
    let k = model.components();
    match &model.projection {
        Projection::Linear { mean, projection } => {
            let centred = centred_columns(x, mean);
            let p = DMatrix::from_row_slice(projection.rows, projection.cols, &projection.data);
            let scores = centred.tr_mul(&p);
            let mut out = FeatureMatrix::zeros(x.rows, k);
            for i in 0..x.rows {
                for j in 0..k {
                    out.data[i * k + j] = scores[(i, j)];
                }
            }
            Ok(out)
        }
        Projection::Rbf {
            gamma,
            references,
            kernel_means,
            grand_mean,
            coefficients,
        } => {
            let mut out = FeatureMatrix::zeros(x.rows, k);
            let mut kv = vec![0.0; references.rows];
            for i in 0..x.rows {
                let row = x.row(i);
                for (t, slot) in kv.iter_mut().enumerate() {
                    *slot = (-gamma * squared_distance(row, references.row(t))).exp();
                }
                let row_mean = kv.iter().sum::<f64>() / kv.len() as f64;
                let dst = out.row_mut(i);
                for (t, &kt) in kv.iter().enumerate() {
                    let c = kt - kernel_means[t] - row_mean + grand_mean;
                    for (j, d) in dst.iter_mut().enumerate() {
                        *d += c * coefficients.get(t, j);
                    }
                }
            }
            Ok(out)
        }
    }
}

fn column_means(x: &FeatureMatrix) -> Vec<f64> {
    let mut mean = vec![0.0; x.cols];
    for row in x.iter_rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    let n = x.rows as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

/// Centred data as a `width × n` column-major matrix (each column a row of
/// `x`).
fn centred_columns(x: &FeatureMatrix, mean: &[f64]) -> DMatrix<f64> {
    let mut data = Vec::with_capacity(x.data.len());
    for row in x.iter_rows() {
        data.extend(row.iter().zip(mean).map(|(v, m)| v - m));
    }
    DMatrix::from_vec(x.cols, x.rows, data)
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn rbf_gram(x: &FeatureMatrix, gamma: f64) -> DMatrix<f64> {
    let n = x.rows;
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        g[(i, i)] = 1.0;
        for j in 0..i {
            let v = (-gamma * squared_distance(x.row(i), x.row(j))).exp();
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// Up to `k` eigenpairs above the relative tolerance, sorted descending.
/// Each eigenvector is signed so that its largest-magnitude entry is
/// positive.
fn leading_eigenpairs(m: DMatrix<f64>, k: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lambda_max = eig.eigenvalues[order[0]];
    if !(lambda_max > 0.0) {
        return Err(Error::Degenerate(
            "all kernel PCA eigenvalues are zero (identical rows?)".into(),
        ));
    }
    let cutoff = EIGEN_TOLERANCE * lambda_max;
    let kept: Vec<usize> = order
        .into_iter()
        .take(k)
        .take_while(|&i| eig.eigenvalues[i] > cutoff)
        .collect();

    let mut vectors = DMatrix::zeros(n, kept.len());
    let mut values = Vec::with_capacity(kept.len());
    for (j, &i) in kept.iter().enumerate() {
        let mut v: DVector<f64> = eig.eigenvectors.column(i).into_owned();
        let pivot = v.iamax();
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        vectors.set_column(j, &v);
        values.push(eig.eigenvalues[i]);
    }
    Ok((values, vectors))
}
