use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::dataset::SplitSpec;
use crate::classifier::SvmTrainConfig;
use crate::deepfeat::{DeepBackendConfig, KernelSpec};
use crate::error::{Error, Result};
use crate::handcrafted::{normalize_groups, FeatureGroup};
use crate::preprocess::PreprocessConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureConfig {
    /// Handcrafted groups; may be empty when deep features are configured.
    #[serde(default = "all_groups")]
    pub groups: Vec<FeatureGroup>,
    #[serde(default)]
    pub deep: Option<DeepBackendConfig>,
}

fn all_groups() -> Vec<FeatureGroup> {
    FeatureGroup::ALL.to_vec()
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            groups: all_groups(),
            deep: None,
        }
    }
}

impl FeatureConfig {
    pub fn handcrafted_width(&self) -> usize {
        self.groups.iter().map(|g| g.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KpcaConfig {
    pub k: usize,
    pub kernel: KernelSpec,
}

impl Default for KpcaConfig {
    fn default() -> Self {
        Self {
            k: 1000,
            kernel: KernelSpec::Linear,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    /// Manifest CSV or class-directory root.
    pub manifest: PathBuf,
    /// Optional RFF1 cache of handcrafted features keyed by sample id.
    #[serde(default)]
    pub handcrafted_features: Option<PathBuf>,
    #[serde(default)]
    pub model_out: Option<PathBuf>,
    #[serde(default)]
    pub report_out: Option<PathBuf>,
}

/// The single JSON document describing an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub features: FeatureConfig,
    #[serde(default)]
    pub kpca: KpcaConfig,
    #[serde(default)]
    pub svm: SvmTrainConfig,
    #[serde(default)]
    pub split: SplitSpec,
    pub paths: PathsConfig,
}

impl RunConfig {
    /// Parse and validate; relative paths are resolved against the config
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.manifest);
        for p in [
            &mut self.paths.handcrafted_features,
            &mut self.paths.model_out,
            &mut self.paths.report_out,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        if let Some(deep) = &self.features.deep {
            let mut p = deep.path().to_path_buf();
            fix(&mut p);
            self.features.deep = Some(deep.with_path(p));
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.preprocess.validate()?;
        self.svm.validate()?;
        self.split.validate()?;
        let mut groups = self.features.groups.clone();
        normalize_groups(&mut groups);
        if groups != self.features.groups {
            return Err(Error::Config(
                "features.groups must be distinct and in canonical order \
                 (texture, glcm, gldm, fft, wavelet, lbp)"
                    .into(),
            ));
        }
        if groups.is_empty() && self.features.deep.is_none() {
            return Err(Error::Config("no feature groups and no deep features".into()));
        }
        if let Some(deep) = &self.features.deep {
            deep.validate()?;
            if self.kpca.k == 0 {
                return Err(Error::Config("kpca.k must be positive".into()));
            }
        }
        if let KernelSpec::Rbf { gamma: Some(g) } = self.kpca.kernel {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Config("kpca.kernel.gamma must be positive".into()));
            }
        }
        Ok(())
    }
}
