use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use super::dataset::SplitSpec;
use super::features::{build_feature_table, RawFeatures};
use crate::classifier::{argmax_label, standardize_apply, svm_decision, StandardizerModel, SvmModel};
use crate::deepfeat::{DeepBackendConfig, KpcaModel};
use crate::error::{Error, Result};
use crate::handcrafted::FeatureGroup;
use crate::label::{ClassLabel, NUM_CLASSES};
use crate::preprocess::PreprocessConfig;
use crate::rff::GroupSpan;

pub const MODEL_FORMAT: &str = "radfuse-model";
pub const MODEL_VERSION: u32 = 1;

/// Where a model came from. Holds nothing time-dependent, so retraining
/// with the same inputs reproduces the file byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    pub svm_seed: u64,
    pub split: Option<SplitSpec>,
    /// SHA-256 over the `id\tlabel` lines of the full dataset.
    pub dataset_hash: Option<String>,
    /// SHA-256 over the `id\tlabel` lines of the training rows.
    pub train_hash: String,
    pub n_train: usize,
    pub requested_k: Option<usize>,
}

/// Everything needed to go from an image to three decision scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineModel {
    pub preprocess: PreprocessConfig,
    pub groups: Vec<FeatureGroup>,
    pub deep: Option<DeepBackendConfig>,
    pub kpca: Option<KpcaModel>,
    pub standardizer: StandardizerModel,
    pub svm: SvmModel,
    pub layout: Vec<GroupSpan>,
    pub provenance: Provenance,
}

/// Label and per-class decision scores for one row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored {
    pub label: ClassLabel,
    pub scores: [f64; NUM_CLASSES],
}

impl PipelineModel {
    pub fn handcrafted_width(&self) -> usize {
        self.groups.iter().map(|g| g.len()).sum()
    }

    pub fn fused_width(&self) -> usize {
        self.handcrafted_width() + self.kpca.as_ref().map_or(0, |k| k.components())
    }

    /// Check that every stored component agrees on widths.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("inconsistent model: {msg}")));
        let fused = self.fused_width();
        if self.deep.is_some() != self.kpca.is_some() {
            return bad("deep backend and kernel PCA must be present together".into());
        }
        if let (Some(deep), Some(kpca)) = (&self.deep, &self.kpca) {
            if deep.width() != kpca.width() {
                return bad(format!(
                    "deep width {} but kernel PCA expects {}",
                    deep.width(),
                    kpca.width()
                ));
            }
        }
        if self.standardizer.width() != fused {
            return bad(format!(
                "standardizer width {} but fused width {fused}",
                self.standardizer.width()
            ));
        }
        if self.svm.machines.len() != NUM_CLASSES
            || self.svm.machines.iter().any(|m| m.weights.len() != fused)
        {
            return bad(format!("svm does not hold {NUM_CLASSES} machines of width {fused}"));
        }
        let layout_width: usize = self.layout.iter().map(|s| s.len).sum();
        if layout_width != fused {
            return bad(format!("layout covers {layout_width} columns, expected {fused}"));
        }
        Ok(())
    }

    /// Fuse, standardize and score rows of raw features.
    pub fn score_raw(&self, raw: &RawFeatures) -> Result<Vec<Scored>> {
        let table = build_feature_table(raw, &self.groups, self.kpca.as_ref())?;
        let z = standardize_apply(&self.standardizer, &table.matrix)?;
        z.iter_rows()
            .map(|row| {
                let scores = svm_decision(&self.svm, row)?;
                Ok(Scored {
                    label: argmax_label(&scores),
                    scores,
                })
            })
            .collect()
    }

    /// Deep backend with its file moved to `path`.
    pub fn with_deep_path(mut self, path: PathBuf) -> Self {
        self.deep = self.deep.map(|d| d.with_path(path));
        self
    }
}

#[derive(Serialize)]
struct EnvelopeOut<'a> {
    format: &'static str,
    version: u32,
    crc32: String,
    model: &'a RawValue,
}

#[derive(Deserialize)]
struct EnvelopeIn<'a> {
    format: String,
    version: u32,
    crc32: String,
    #[serde(borrow)]
    model: &'a RawValue,
}

/// Serialize to the JSON envelope used on disk.
pub fn model_to_bytes(model: &PipelineModel) -> Result<Vec<u8>> {
    let payload = serde_json::to_string(model)?;
    let raw = RawValue::from_string(payload)?;
    let env = EnvelopeOut {
        format: MODEL_FORMAT,
        version: MODEL_VERSION,
        crc32: format!("{:08x}", crc32fast::hash(raw.get().as_bytes())),
        model: &raw,
    };
    let mut out = serde_json::to_vec(&env)?;
    out.push(b'\n');
    Ok(out)
}

pub fn model_from_bytes(bytes: &[u8], origin: &Path) -> Result<PipelineModel> {
    let malformed = |reason: String| Error::Malformed {
        path: origin.to_path_buf(),
        reason,
    };
    let env: EnvelopeIn<'_> =
        serde_json::from_slice(bytes).map_err(|e| malformed(e.to_string()))?;
    if env.format != MODEL_FORMAT {
        return Err(malformed(format!("not a model file (format `{}`)", env.format)));
    }
    if env.version != MODEL_VERSION {
        return Err(Error::Version {
            what: "model",
            found: env.version,
            expected: MODEL_VERSION,
        });
    }
    let crc = format!("{:08x}", crc32fast::hash(env.model.get().as_bytes()));
    if crc != env.crc32 {
        return Err(Error::Checksum(origin.display().to_string()));
    }
    let model: PipelineModel =
        serde_json::from_str(env.model.get()).map_err(|e| malformed(e.to_string()))?;
    model.validate()?;
    Ok(model)
}

pub fn save_model(model: &PipelineModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = model_to_bytes(model)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<PipelineModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes, path)
}
