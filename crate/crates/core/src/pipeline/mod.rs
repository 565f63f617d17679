//! Dataset handling, feature fusion, training, persistence and prediction.

pub mod config;
pub mod dataset;
pub mod features;
pub mod model;

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use self::config::{FeatureConfig, KpcaConfig, PathsConfig, RunConfig};
pub use self::dataset::{
    ingest, labeled_hash, sample_id_for_path, split, LabeledDataset, Sample, Split, SplitSpec,
};
pub use self::features::{
    build_feature_table, extract_raw, fused_layout, FeatureSources, FeatureTable,
    HandcraftedCache, RawFeatures, DEEP_BLOCK,
};
pub use self::model::{
    load_model, model_from_bytes, model_to_bytes, save_model, PipelineModel, Provenance, Scored,
    MODEL_FORMAT, MODEL_VERSION,
};

use crate::classifier::{standardize_apply, standardize_fit, svm_fit};
use crate::deepfeat::{kpca_fit, DeepFeatureProvider};
use crate::error::{Error, Result};
use crate::evalmetrics::EvalReport;
use crate::label::{ClassLabel, NUM_CLASSES};

/// A fitting step that must only ever see training rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStage {
    Kpca,
    Standardizer,
    Svm,
}

impl FitStage {
    pub fn as_str(self) -> &'static str {
        match self {
            FitStage::Kpca => "kernel PCA fit",
            FitStage::Standardizer => "standardizer fit",
            FitStage::Svm => "SVM fit",
        }
    }
}

/// Observer called with the row ids handed to every fitting step.
pub trait FitAudit: Sync {
    fn observe(&self, stage: FitStage, ids: &[String]) -> Result<()>;
}

/// Audit that accepts everything.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoAudit;

impl FitAudit for NoAudit {
    fn observe(&self, _: FitStage, _: &[String]) -> Result<()> {
        Ok(())
    }
}

/// Fails with [`Error::Leakage`] when a held-out id reaches a fit.
#[derive(Debug, Clone, Default)]
pub struct HoldoutGuard {
    held_out: HashSet<String>,
}

impl HoldoutGuard {
    pub fn new<I, S>(ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            held_out: ids.into_iter().map(Into::into).collect(),
        }
    }
}

impl FitAudit for HoldoutGuard {
    fn observe(&self, stage: FitStage, ids: &[String]) -> Result<()> {
        match ids.iter().find(|id| self.held_out.contains(*id)) {
            Some(id) => Err(Error::Leakage {
                stage: stage.as_str(),
                id: id.clone(),
            }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineReport {
    pub class: ClassLabel,
    pub epochs: usize,
    pub duality_gap: f64,
    pub converged: bool,
}

/// Diagnostics written next to a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub created_unix: u64,
    pub generator: String,
    pub n_train: usize,
    pub class_counts: [usize; NUM_CLASSES],
    pub handcrafted_width: usize,
    pub requested_k: Option<usize>,
    pub effective_k: Option<usize>,
    pub fused_width: usize,
    pub train_accuracy: f64,
    pub machines: Vec<MachineReport>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: PipelineModel,
    pub report: TrainReport,
}

fn generator() -> String {
    concat!("radfuse ", env!("CARGO_PKG_VERSION")).to_string()
}

/// Fit kernel PCA on the deep block, fuse, fit the standardizer, then the
/// SVM. Every fit sees only the rows of `train`, and each one is reported
/// to `audit` first.
pub fn train_pipeline(
    train: &RawFeatures,
    labels: &[ClassLabel],
    cfg: &RunConfig,
    audit: &dyn FitAudit,
) -> Result<Trained> {
    cfg.validate()?;
    if train.len() != labels.len() {
        return Err(Error::arg(format!(
            "{} feature rows but {} labels",
            train.len(),
            labels.len()
        )));
    }
    let groups = &cfg.features.groups;
    if train.handcrafted.cols != cfg.features.handcrafted_width() {
        return Err(Error::arg(format!(
            "handcrafted block has {} columns but the configured groups need {}",
            train.handcrafted.cols,
            cfg.features.handcrafted_width()
        )));
    }
    if train.deep.is_some() != cfg.features.deep.is_some() {
        return Err(Error::arg(
            "deep features must be supplied exactly when a deep backend is configured",
        ));
    }

    let mut warnings = Vec::new();
    let (kpca, reduced) = match &train.deep {
        Some(deep) => {
            audit.observe(FitStage::Kpca, &train.ids)?;
            let fit = kpca_fit(deep, cfg.kpca.k, cfg.kpca.kernel)?;
            let kept = fit.model.components();
            if kept < cfg.kpca.k {
                let msg = format!(
                    "kpca.k = {} exceeds the attainable rank; using {kept} components",
                    cfg.kpca.k
                );
                log::warn!("{msg}");
                warnings.push(msg);
            }
            (Some(fit.model), Some(fit.scores))
        }
        None => (None, None),
    };
    let table = features::fuse(train, groups, reduced)?;

    audit.observe(FitStage::Standardizer, &train.ids)?;
    let standardizer = standardize_fit(&table.matrix)?;
    let z = standardize_apply(&standardizer, &table.matrix)?;

    audit.observe(FitStage::Svm, &train.ids)?;
    let svm = svm_fit(&z, labels, &cfg.svm)?;
    for (class, m) in ClassLabel::ALL.iter().zip(&svm.machines) {
        if !m.converged {
            let msg = format!(
                "{class} machine stopped after {} epochs with duality gap {:.3e}",
                m.epochs, m.duality_gap
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }

    let model = PipelineModel {
        preprocess: cfg.preprocess.clone(),
        groups: groups.clone(),
        deep: cfg.features.deep.clone(),
        kpca,
        standardizer,
        svm,
        layout: table.layout,
        provenance: Provenance {
            generator: generator(),
            svm_seed: cfg.svm.seed,
            split: None,
            dataset_hash: None,
            train_hash: labeled_hash(train.ids.iter().map(String::as_str).zip(labels.iter().copied())),
            n_train: train.len(),
            requested_k: cfg.features.deep.as_ref().map(|_| cfg.kpca.k),
        },
    };
    model.validate()?;

    let scored = model.score_raw(train)?;
    let correct = scored
        .iter()
        .zip(labels)
        .filter(|(s, l)| s.label == **l)
        .count();
    let mut class_counts = [0; NUM_CLASSES];
    for l in labels {
        class_counts[l.index()] += 1;
    }
    let report = TrainReport {
        created_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        generator: generator(),
        n_train: train.len(),
        class_counts,
        handcrafted_width: cfg.features.handcrafted_width(),
        requested_k: model.provenance.requested_k,
        effective_k: model.kpca.as_ref().map(|k| k.components()),
        fused_width: model.fused_width(),
        train_accuracy: correct as f64 / train.len() as f64,
        machines: ClassLabel::ALL
            .iter()
            .zip(&model.svm.machines)
            .map(|(&class, m)| MachineReport {
                class,
                epochs: m.epochs,
                duality_gap: m.duality_gap,
                converged: m.converged,
            })
            .collect(),
        warnings,
    };
    Ok(Trained { model, report })
}

/// A loaded model bound to its deep-feature backend.
pub struct Predictor {
    model: PipelineModel,
    deep: Option<Box<dyn DeepFeatureProvider>>,
    cache: Option<HandcraftedCache>,
}

impl Predictor {
    pub fn new(model: PipelineModel) -> Result<Self> {
        let deep = model.deep.as_ref().map(|d| d.open()).transpose()?;
        Self::with_provider(model, deep)
    }

    /// Use `deep` instead of opening the backend named in the model.
    pub fn with_provider(
        model: PipelineModel,
        deep: Option<Box<dyn DeepFeatureProvider>>,
    ) -> Result<Self> {
        model.validate()?;
        match (&model.deep, &deep) {
            (Some(cfg), Some(p)) if p.width() != cfg.width() => {
                return Err(Error::Provider(format!(
                    "provider width {} but the model expects {}",
                    p.width(),
                    cfg.width()
                )))
            }
            (Some(_), None) => return Err(Error::Provider("model needs deep features".into())),
            (None, Some(_)) => return Err(Error::arg("model does not use deep features")),
            _ => {}
        }
        Ok(Self {
            model,
            deep,
            cache: None,
        })
    }

    /// Read handcrafted rows from a feature file instead of the images.
    pub fn with_handcrafted_cache(mut self, cache: HandcraftedCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn model(&self) -> &PipelineModel {
        &self.model
    }

    fn sources(&self) -> FeatureSources<'_> {
        FeatureSources {
            handcrafted_cache: self.cache.as_ref(),
            deep: self.deep.as_deref(),
        }
    }

    /// Score a batch; the first failing sample aborts it.
    pub fn predict_samples(&self, samples: &[Sample]) -> Result<Vec<Scored>> {
        let raw = extract_raw(
            samples,
            &self.model.groups,
            &self.model.preprocess,
            self.sources(),
        )?;
        self.model.score_raw(&raw)
    }

    /// Score one image; its sample id is the file stem.
    pub fn predict(&self, path: &Path) -> Result<Scored> {
        let sample = Sample {
            id: sample_id_for_path(path),
            path: path.to_path_buf(),
            label: ClassLabel::Covid,
        };
        let raw = extract_raw(
            std::slice::from_ref(&sample),
            &self.model.groups,
            &self.model.preprocess,
            self.sources(),
        )
        .map_err(|e| match e {
            Error::Sample { source, .. } => *source,
            other => other,
        })?;
        Ok(self.model.score_raw(&raw)?[0])
    }

    /// Score each image independently, keeping failures in place.
    pub fn predict_each(&self, paths: &[PathBuf]) -> Vec<Result<Scored>> {
        paths.par_iter().map(|p| self.predict(p)).collect()
    }

    /// Score labeled samples and summarize them as an evaluation report.
    pub fn evaluate(&self, name: &str, samples: &[Sample]) -> Result<(EvalReport, Vec<Scored>)> {
        let scored = self.predict_samples(samples)?;
        let truth: Vec<ClassLabel> = samples.iter().map(|s| s.label).collect();
        let pred: Vec<ClassLabel> = scored.iter().map(|s| s.label).collect();
        Ok((EvalReport::evaluate(name, &truth, &pred)?, scored))
    }
}

/// Dataset, split and raw features of every sample, ready for fitting.
pub struct PreparedData {
    pub dataset: LabeledDataset,
    pub split: Split,
    pub raw: RawFeatures,
}

impl PreparedData {
    pub fn train_labels(&self) -> Vec<ClassLabel> {
        self.split
            .train
            .iter()
            .map(|&i| self.dataset.samples[i].label)
            .collect()
    }

    pub fn test_labels(&self) -> Vec<ClassLabel> {
        self.split
            .test
            .iter()
            .map(|&i| self.dataset.samples[i].label)
            .collect()
    }

    pub fn test_ids(&self) -> Vec<String> {
        self.split
            .test
            .iter()
            .map(|&i| self.dataset.samples[i].id.clone())
            .collect()
    }

    /// Copy without the deep block, for handcrafted-only comparisons.
    pub fn without_deep(&self) -> PreparedData {
        PreparedData {
            dataset: self.dataset.clone(),
            split: self.split.clone(),
            raw: RawFeatures {
                deep: None,
                ..self.raw.clone()
            },
        }
    }
}

/// Ingest, split and extract features for the experiment in `cfg`.
pub fn prepare(cfg: &RunConfig) -> Result<PreparedData> {
    cfg.validate()?;
    let dataset = ingest(&cfg.paths.manifest)?;
    let split = split(&dataset, &cfg.split)?;
    let cache = cfg
        .paths
        .handcrafted_features
        .as_ref()
        .map(|p| HandcraftedCache::open(p, &cfg.features.groups))
        .transpose()?;
    let deep = cfg.features.deep.as_ref().map(|d| d.open()).transpose()?;
    log::info!(
        "extracting features for {} samples ({} train / {} test)",
        dataset.len(),
        split.train.len(),
        split.test.len()
    );
    let raw = extract_raw(
        &dataset.samples,
        &cfg.features.groups,
        &cfg.preprocess,
        FeatureSources {
            handcrafted_cache: cache.as_ref(),
            deep: deep.as_deref(),
        },
    )?;
    Ok(PreparedData {
        dataset,
        split,
        raw,
    })
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub model: PipelineModel,
    pub train_report: TrainReport,
    pub test_report: EvalReport,
    pub test_predictions: Vec<Scored>,
}

/// Train on the training rows of `data` and evaluate on its test rows.
pub fn fit_and_evaluate(
    cfg: &RunConfig,
    data: &PreparedData,
    name: &str,
) -> Result<ExperimentOutcome> {
    let guard = HoldoutGuard::new(data.test_ids());
    let train_raw = data.raw.select(&data.split.train);
    let Trained { mut model, report } =
        train_pipeline(&train_raw, &data.train_labels(), cfg, &guard)?;
    model.provenance.split = Some(cfg.split.clone());
    model.provenance.dataset_hash = Some(data.dataset.content_hash());

    let test_raw = data.raw.select(&data.split.test);
    let scored = model.score_raw(&test_raw)?;
    let pred: Vec<ClassLabel> = scored.iter().map(|s| s.label).collect();
    let test_report = EvalReport::evaluate(name, &data.test_labels(), &pred)?;
    Ok(ExperimentOutcome {
        model,
        train_report: report,
        test_report,
        test_predictions: scored,
    })
}

/// [`prepare`] followed by [`fit_and_evaluate`].
pub fn run_experiment(cfg: &RunConfig, name: &str) -> Result<ExperimentOutcome> {
    fit_and_evaluate(cfg, &prepare(cfg)?, name)
}

/// Test rows of the split recorded in a model, after checking the dataset
/// is the one it was trained on.
pub fn recorded_test_split(model: &PipelineModel, dataset: &LabeledDataset) -> Result<Vec<Sample>> {
    let spec = model
        .provenance
        .split
        .as_ref()
        .ok_or_else(|| Error::Config("model does not record a train/test split".into()))?;
    if let Some(hash) = &model.provenance.dataset_hash {
        if *hash != dataset.content_hash() {
            return Err(Error::Dataset(
                "dataset differs from the one the model was trained on".into(),
            ));
        }
    }
    let s = split(dataset, spec)?;
    Ok(s.test.iter().map(|&i| dataset.samples[i].clone()).collect())
}
