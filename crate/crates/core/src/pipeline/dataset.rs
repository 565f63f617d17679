use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::label::{ClassLabel, NUM_CLASSES};

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub id: String,
    pub path: PathBuf,
    pub label: ClassLabel,
}

/// Samples sorted by id; ids are unique.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabeledDataset {
    pub samples: Vec<Sample>,
}

impl LabeledDataset {
    pub fn new(mut samples: Vec<Sample>) -> Result<Self> {
        samples.sort_by(|a, b| a.id.cmp(&b.id));
        for pair in samples.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::Dataset(format!("duplicate sample id `{}`", pair[0].id)));
            }
        }
        Ok(Self { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<ClassLabel> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn ids(&self) -> Vec<String> {
        self.samples.iter().map(|s| s.id.clone()).collect()
    }

    pub fn subset(&self, idx: &[usize]) -> LabeledDataset {
        LabeledDataset {
            samples: idx.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut counts = [0; NUM_CLASSES];
        for s in &self.samples {
            counts[s.label.index()] += 1;
        }
        counts
    }

    /// SHA-256 over the `(id, label)` list, hex encoded. Image paths are not
    /// part of the hash so datasets can move between machines.
    pub fn content_hash(&self) -> String {
        labeled_hash(self.samples.iter().map(|s| (s.id.as_str(), s.label)))
    }
}

/// SHA-256 over `id\tlabel\n` lines, hex encoded.
pub fn labeled_hash<'a>(rows: impl IntoIterator<Item = (&'a str, ClassLabel)>) -> String {
    let mut h = Sha256::new();
    for (id, label) in rows {
        h.update(id.as_bytes());
        h.update(b"\t");
        h.update(label.as_str().as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Deserialize)]
struct ManifestRow {
    id: String,
    path: PathBuf,
    label: String,
}

/// Load a manifest CSV (`id,path,label`, paths relative to the manifest) or
/// a directory holding `covid/`, `normal/` and `pneumonia/` subdirectories.
pub fn ingest(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if meta.is_dir() {
        ingest_directory(path)
    } else {
        ingest_manifest(path)
    }
}

fn ingest_manifest(path: &Path) -> Result<LabeledDataset> {
    let base = path.parent().unwrap_or(Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?
        .clone();
    for required in ["id", "path", "label"] {
        if !headers.iter().any(|h| h == required) {
            return Err(Error::Dataset(format!(
                "{}: manifest header must contain `id,path,label`",
                path.display()
            )));
        }
    }
    let mut samples = Vec::new();
    for (line, row) in reader.deserialize::<ManifestRow>().enumerate() {
        let row = row.map_err(|e| Error::Dataset(format!("{} row {}: {e}", path.display(), line + 2)))?;
        let label: ClassLabel = row.label.parse()?;
        let image = if row.path.is_absolute() {
            row.path
        } else {
            base.join(row.path)
        };
        if !image.is_file() {
            return Err(Error::Dataset(format!(
                "sample `{}`: image {} does not exist",
                row.id,
                image.display()
            )));
        }
        samples.push(Sample {
            id: row.id,
            path: image,
            label,
        });
    }
    LabeledDataset::new(samples)
}

fn ingest_directory(root: &Path) -> Result<LabeledDataset> {
    let mut samples = Vec::new();
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with('.') || !entry.path().is_dir() {
            continue;
        }
        let label: ClassLabel = name
            .parse()
            .map_err(|_| Error::Dataset(format!("unexpected class directory `{name}`")))?;
        let dir = entry.path();
        for file in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let file = file.map_err(|e| Error::io(&dir, e))?.path();
            let is_image = file
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
            if !is_image || !file.is_file() {
                continue;
            }
            let id = sample_id_for_path(&file);
            samples.push(Sample {
                id,
                path: file,
                label,
            });
        }
    }
    LabeledDataset::new(samples)
}

/// Id used for images outside a manifest: the file stem.
pub fn sample_id_for_path(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            seed: 0,
            stratified: true,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config("split.train_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Row indices into the dataset, each list ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded train/test split.
///
/// The training set holds `round(fraction · n)` samples. When stratified,
/// that total is apportioned over classes by largest remainder, so every
/// class gets within one sample of `fraction · n_c`, and each class keeps at
/// least one sample on both sides.
pub fn split(ds: &LabeledDataset, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let n = ds.len();
    if n < 2 {
        return Err(Error::arg("cannot split fewer than two samples"));
    }
    let total_train = ((spec.train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = Vec::with_capacity(total_train);

    if spec.stratified {
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); NUM_CLASSES];
        for (i, s) in ds.samples.iter().enumerate() {
            by_class[s.label.index()].push(i);
        }
        for (c, members) in by_class.iter().enumerate() {
            if members.len() == 1 {
                return Err(Error::arg(format!(
                    "class {} has a single sample; stratified split needs two",
                    ClassLabel::ALL[c]
                )));
            }
        }
        let quotas = apportion(&by_class, spec.train_fraction, total_train);
        for (members, quota) in by_class.iter_mut().zip(quotas) {
            members.shuffle(&mut rng);
            train.extend_from_slice(&members[..quota]);
        }
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        train.extend_from_slice(&all[..total_train]);
    }

    train.sort_unstable();
    let in_train: HashSet<usize> = train.iter().copied().collect();
    let test = (0..n).filter(|i| !in_train.contains(i)).collect();
    Ok(Split { train, test })
}

fn apportion(by_class: &[Vec<usize>], fraction: f64, total: usize) -> Vec<usize> {
    let sizes: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let exact: Vec<f64> = sizes.iter().map(|&s| fraction * s as f64).collect();
    let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut assigned: usize = quota.iter().sum();
    // Hand out the remaining places by descending fractional part; ties go
    // to the earlier class.
    let mut order: Vec<usize> = (0..sizes.len()).filter(|&c| sizes[c] > 0).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    while assigned < total {
        let before = assigned;
        for &c in &order {
            if assigned < total && quota[c] + 1 < sizes[c] {
                quota[c] += 1;
                assigned += 1;
            }
        }
        if assigned == before {
            break;
        }
    }
    // Keep at least one training and one test sample per class.
    for (q, &s) in quota.iter_mut().zip(&sizes) {
        if s >= 2 {
            *q = (*q).clamp(1, s - 1);
        }
    }
    quota
}
