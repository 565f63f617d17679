//! Deep features from a frozen CNN backbone and their kernel-PCA reduction.
//!
//! Rows come either from precomputed RFF1 files (keyed by sample id) or from
//! an ONNX graph run on the centred input tensor. Backbone weights are never
//! updated.

pub mod kpca;
#[cfg(feature = "onnx")]
mod onnx;

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use self::kpca::{kpca_fit, kpca_transform, KernelSpec, KpcaFit, KpcaModel};
#[cfg(feature = "onnx")]
pub use self::onnx::{OnnxBackbone, OnnxMetadata, TensorLayout};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::preprocess::CenteredRgbTensor;
use crate::rff::{read_rff, FeatureFile};

/// Flattened width of VGG16's last pooling block (7×7×512).
pub const VGG16_WIDTH: usize = 25_088;
/// Flattened width of ResNet50's last convolutional stage (7×7×2048).
pub const RESNET50_WIDTH: usize = 100_352;

/// Source of one fixed-width feature row per sample.
pub trait DeepFeatureProvider: Send + Sync {
    /// Declared row width.
    fn width(&self) -> usize;

    /// Whether [`DeepFeatureProvider::row`] needs the centred image tensor.
    fn needs_pixels(&self) -> bool;

    fn row(&self, id: &str, tensor: Option<&CenteredRgbTensor>) -> Result<Vec<f64>>;
}

/// One sample to featurize.
#[derive(Debug, Clone, Copy)]
pub struct DeepInput<'a> {
    pub id: &'a str,
    pub tensor: Option<&'a CenteredRgbTensor>,
}

/// Deep feature rows with their sample ids.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepFeatureMatrix {
    pub ids: Vec<String>,
    pub features: FeatureMatrix,
}

/// Rows for a batch, in input order. The first failing sample aborts the
/// batch with its id attached.
pub fn deep_features(
    provider: &dyn DeepFeatureProvider,
    inputs: &[DeepInput<'_>],
) -> Result<DeepFeatureMatrix> {
    let width = provider.width();
    let rows: Vec<Vec<f64>> = inputs
        .par_iter()
        .map(|input| {
            let row = provider
                .row(input.id, input.tensor)
                .map_err(|e| e.for_sample(input.id))?;
            check_row(&row, width).map_err(|e| e.for_sample(input.id))?;
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let features = if rows.is_empty() {
        FeatureMatrix::zeros(0, width)
    } else {
        FeatureMatrix::from_rows(&rows)?
    };
    Ok(DeepFeatureMatrix {
        ids: inputs.iter().map(|i| i.id.to_string()).collect(),
        features,
    })
}

fn check_row(row: &[f64], width: usize) -> Result<()> {
    if row.len() != width {
        return Err(Error::Provider(format!(
            "row has {} values, provider declares {width}",
            row.len()
        )));
    }
    if row.iter().any(|v| !v.is_finite()) {
        return Err(Error::Provider("non-finite deep feature value".into()));
    }
    Ok(())
}

/// Rows looked up by id in an RFF1 file.
#[derive(Debug, Clone)]
pub struct PrecomputedFeatures {
    file: FeatureFile,
    index: HashMap<String, usize>,
}

impl PrecomputedFeatures {
    pub fn open(path: impl AsRef<Path>, width: usize) -> Result<Self> {
        Self::from_file(read_rff(path)?, width)
    }

    pub fn from_file(file: FeatureFile, width: usize) -> Result<Self> {
        if file.matrix.cols != width {
            return Err(Error::Provider(format!(
                "feature file has {} columns, configuration declares {width}",
                file.matrix.cols
            )));
        }
        let index = file
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        Ok(Self { file, index })
    }

    pub fn ids(&self) -> &[String] {
        &self.file.ids
    }
}

impl DeepFeatureProvider for PrecomputedFeatures {
    fn width(&self) -> usize {
        self.file.matrix.cols
    }

    fn needs_pixels(&self) -> bool {
        false
    }

    fn row(&self, id: &str, _tensor: Option<&CenteredRgbTensor>) -> Result<Vec<f64>> {
        let i = *self
            .index
            .get(id)
            .ok_or_else(|| Error::Lookup(id.to_string()))?;
        Ok(self.file.matrix.row(i).to_vec())
    }
}

/// Deep-feature settings in the run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "lowercase", deny_unknown_fields)]
pub enum DeepBackendConfig {
    Precomputed { feature_path: PathBuf, width: usize },
    Onnx { model_path: PathBuf, width: usize },
}

impl DeepBackendConfig {
    pub fn width(&self) -> usize {
        match self {
            DeepBackendConfig::Precomputed { width, .. } | DeepBackendConfig::Onnx { width, .. } => {
                *width
            }
        }
    }

    pub fn path(&self) -> &Path {
        match self {
            DeepBackendConfig::Precomputed { feature_path, .. } => feature_path,
            DeepBackendConfig::Onnx { model_path, .. } => model_path,
        }
    }

    /// Same backend with a different file.
    pub fn with_path(&self, path: PathBuf) -> Self {
        match self {
            DeepBackendConfig::Precomputed { width, .. } => DeepBackendConfig::Precomputed {
                feature_path: path,
                width: *width,
            },
            DeepBackendConfig::Onnx { width, .. } => DeepBackendConfig::Onnx {
                model_path: path,
                width: *width,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width() == 0 {
            return Err(Error::Config("deep.width must be positive".into()));
        }
        Ok(())
    }

    pub fn open(&self) -> Result<Box<dyn DeepFeatureProvider>> {
        match self {
            DeepBackendConfig::Precomputed {
                feature_path,
                width,
            } => Ok(Box::new(PrecomputedFeatures::open(feature_path, *width)?)),
            #[cfg(feature = "onnx")]
            DeepBackendConfig::Onnx { model_path, width } => {
                Ok(Box::new(OnnxBackbone::open(model_path, *width)?))
            }
            #[cfg(not(feature = "onnx"))]
            DeepBackendConfig::Onnx { .. } => Err(Error::Config(
                "this build has no ONNX support (enable the `onnx` feature)".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file() -> FeatureFile {
        let m = FeatureMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        FeatureFile::new(vec!["x".into(), "y".into(), "z".into()], m, "stand-in")
    }

    #[test]
    fn precomputed_lookup_in_input_order() {
        let p = PrecomputedFeatures::from_file(file(), 2).unwrap();
        let inputs = [
            DeepInput { id: "z", tensor: None },
            DeepInput { id: "x", tensor: None },
        ];
        let m = deep_features(&p, &inputs).unwrap();
        assert_eq!(m.ids, vec!["z", "x"]);
        assert_eq!(m.features.row(0), &[5.0, 6.0]);
        assert_eq!(m.features.row(1), &[1.0, 2.0]);
    }

    #[test]
    fn missing_id_names_the_sample() {
        let p = PrecomputedFeatures::from_file(file(), 2).unwrap();
        let err = deep_features(&p, &[DeepInput { id: "nope", tensor: None }]).unwrap_err();
        assert!(matches!(err.root(), Error::Lookup(id) if id == "nope"));
        assert!(err.to_string().contains("nope"));
    }

    #[test]
    fn width_mismatch() {
        assert!(matches!(
            PrecomputedFeatures::from_file(file(), 3),
            Err(Error::Provider(_))
        ));
    }

    #[test]
    fn config_serde() {
        let cfg: DeepBackendConfig = serde_json::from_str(
            r#"{"backend":"precomputed","feature_path":"a.rff","width":25088}"#,
        )
        .unwrap();
        assert_eq!(cfg.width(), VGG16_WIDTH);
        assert!(serde_json::from_str::<DeepBackendConfig>(
            r#"{"backend":"precomputed","feature_path":"a.rff","width":1,"x":0}"#
        )
        .is_err());
    }
}
