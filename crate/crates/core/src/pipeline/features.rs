use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use super::dataset::Sample;
use crate::deepfeat::{kpca_transform, DeepFeatureProvider, KpcaModel};
use crate::error::{Error, Result};
use crate::handcrafted::{extract_groups, FeatureGroup};
use crate::matrix::FeatureMatrix;
use crate::preprocess::{preprocess_image, PreprocessConfig};
use crate::rff::{read_rff, FeatureFile, GroupSpan};

/// Name of the reduced deep block in fused layouts.
pub const DEEP_BLOCK: &str = "deep_kpca";

/// Handcrafted rows read from an RFF1 file written by `extract`, restricted
/// to a group selection.
#[derive(Debug, Clone)]
pub struct HandcraftedCache {
    file: FeatureFile,
    index: HashMap<String, usize>,
    columns: Vec<usize>,
}

impl HandcraftedCache {
    pub fn open(path: impl AsRef<Path>, groups: &[FeatureGroup]) -> Result<Self> {
        Self::from_file(read_rff(path)?, groups)
    }

    pub fn from_file(file: FeatureFile, groups: &[FeatureGroup]) -> Result<Self> {
        let mut columns = Vec::new();
        for g in groups {
            let span = file
                .group_layout
                .iter()
                .find(|s| s.name == g.name() && s.len == g.len())
                .ok_or_else(|| {
                    Error::Config(format!("handcrafted feature file lacks the `{g}` group"))
                })?;
            columns.extend(span.offset..span.offset + span.len);
        }
        let index = file
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        Ok(Self {
            file,
            index,
            columns,
        })
    }

    pub fn row(&self, id: &str) -> Result<Vec<f64>> {
        let i = *self
            .index
            .get(id)
            .ok_or_else(|| Error::Lookup(id.to_string()))?;
        let row = self.file.matrix.row(i);
        Ok(self.columns.iter().map(|&c| row[c]).collect())
    }
}

/// Where feature rows come from besides the images themselves.
#[derive(Clone, Copy, Default)]
pub struct FeatureSources<'a> {
    pub handcrafted_cache: Option<&'a HandcraftedCache>,
    pub deep: Option<&'a dyn DeepFeatureProvider>,
}

/// Unreduced features: handcrafted block plus optional raw deep block, one
/// row per sample in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFeatures {
    pub ids: Vec<String>,
    pub handcrafted: FeatureMatrix,
    pub deep: Option<FeatureMatrix>,
}

impl RawFeatures {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> RawFeatures {
        RawFeatures {
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
            handcrafted: self.handcrafted.select_rows(idx),
            deep: self.deep.as_ref().map(|d| d.select_rows(idx)),
        }
    }
}

/// Extract the configured features for every sample, in parallel, keeping
/// input order. Any failing sample aborts the whole batch with its id.
pub fn extract_raw(
    samples: &[Sample],
    groups: &[FeatureGroup],
    preprocess: &PreprocessConfig,
    sources: FeatureSources<'_>,
) -> Result<RawFeatures> {
    let need_pixels = (!groups.is_empty() && sources.handcrafted_cache.is_none())
        || sources.deep.is_some_and(|d| d.needs_pixels());
    let done = AtomicUsize::new(0);
    let total = samples.len();

    let rows: Vec<(Vec<f64>, Option<Vec<f64>>)> = samples
        .par_iter()
        .map(|s| {
            let result = (|| {
                let images = if need_pixels {
                    Some(preprocess_image(&s.path, preprocess)?)
                } else {
                    None
                };
                let hc = match (sources.handcrafted_cache, &images) {
                    _ if groups.is_empty() => Vec::new(),
                    (Some(cache), _) => cache.row(&s.id)?,
                    (None, Some((gray, _))) => extract_groups(gray, groups)?,
                    (None, None) => unreachable!(),
                };
                let deep = match sources.deep {
                    Some(p) => Some(p.row(&s.id, images.as_ref().map(|(_, t)| t))?),
                    None => None,
                };
                Ok((hc, deep))
            })();
            let n = done.fetch_add(1, Ordering::Relaxed) + 1;
            if n % 100 == 0 || n == total {
                log::info!("features: {n}/{total}");
            }
            result.map_err(|e: Error| e.for_sample(&s.id))
        })
        .collect::<Result<_>>()?;

    let hc_width: usize = groups.iter().map(|g| g.len()).sum();
    let mut handcrafted = FeatureMatrix::zeros(0, hc_width);
    let mut deep_rows = Vec::new();
    for (hc, deep) in rows {
        handcrafted.data.extend(hc);
        handcrafted.rows += 1;
        if let Some(d) = deep {
            deep_rows.push(d);
        }
    }
    let deep = match sources.deep {
        Some(p) => {
            for (s, r) in samples.iter().zip(&deep_rows) {
                if r.len() != p.width() || r.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Provider(format!(
                        "bad deep feature row ({} values, provider width {})",
                        r.len(),
                        p.width()
                    ))
                    .for_sample(&s.id));
                }
            }
            let mut m = FeatureMatrix::from_rows(&deep_rows)?;
            m.cols = p.width();
            Some(m)
        }
        None => None,
    };
    Ok(RawFeatures {
        ids: samples.iter().map(|s| s.id.clone()).collect(),
        handcrafted,
        deep,
    })
}

/// Fused feature rows with their column layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub ids: Vec<String>,
    pub matrix: FeatureMatrix,
    pub layout: Vec<GroupSpan>,
}

/// Column layout `[handcrafted groups… | deep_kpca]`.
pub fn fused_layout(groups: &[FeatureGroup], deep_components: Option<usize>) -> Vec<GroupSpan> {
    let mut layout = Vec::new();
    let mut offset = 0;
    for g in groups {
        layout.push(GroupSpan {
            name: g.name().to_string(),
            offset,
            len: g.len(),
        });
        offset += g.len();
    }
    if let Some(k) = deep_components {
        layout.push(GroupSpan {
            name: DEEP_BLOCK.to_string(),
            offset,
            len: k,
        });
    }
    layout
}

/// Reduce the deep block with `kpca` (when present) and append it to the
/// handcrafted block.
pub fn build_feature_table(
    raw: &RawFeatures,
    groups: &[FeatureGroup],
    kpca: Option<&KpcaModel>,
) -> Result<FeatureTable> {
    let reduced = match (&raw.deep, kpca) {
        (Some(deep), Some(model)) => Some(kpca_transform(model, deep)?),
        (None, None) => None,
        (Some(_), None) => return Err(Error::arg("deep features present but no kernel PCA model")),
        (None, Some(_)) => return Err(Error::arg("kernel PCA model given but no deep features")),
    };
    fuse(raw, groups, reduced)
}

pub(crate) fn fuse(
    raw: &RawFeatures,
    groups: &[FeatureGroup],
    reduced: Option<FeatureMatrix>,
) -> Result<FeatureTable> {
    let layout = fused_layout(groups, reduced.as_ref().map(|m| m.cols));
    let matrix = match reduced {
        Some(r) => raw.handcrafted.hstack(&r)?,
        None => raw.handcrafted.clone(),
    };
    Ok(FeatureTable {
        ids: raw.ids.clone(),
        matrix,
        layout,
    })
}
