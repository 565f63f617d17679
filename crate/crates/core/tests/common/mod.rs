//! Oracles, random inputs and synthetic datasets shared by the integration
//! tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use radfuse::matrix::FeatureMatrix;
use radfuse::preprocess::{preprocess_image, GrayImage, PreprocessConfig};
use radfuse::rff::{write_rff, FeatureFile, GroupSpan};
use radfuse::ClassLabel;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(rng: &mut ChaCha8Rng, width: usize, height: usize, levels: u32) -> GrayImage {
    GrayImage::from_fn(width, height, |_, _| rng.gen_range(0..levels) as u8)
}

// ---------------------------------------------------------------- statistics

/// Neumaier-compensated sum.
pub fn exact_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Brute-force reference for the fourteen statistics, in output order.
pub fn stats_oracle(p: &[f64]) -> [f64; 14] {
    let n = p.len() as f64;
    let area = exact_sum(p.iter().copied());
    let mean = area / n;
    let dev: Vec<f64> = p.iter().map(|v| v - mean).collect();
    let m2 = exact_sum(dev.iter().map(|d| d * d)) / n;
    let m3 = exact_sum(dev.iter().map(|d| d * d * d)) / n;
    let m4 = exact_sum(dev.iter().map(|d| (d * d) * (d * d))) / n;
    let (skew, kurt) = if m2 < 1e-12 {
        (0.0, 0.0)
    } else {
        (m3 / (m2 * m2.sqrt()), m4 / (m2 * m2) - 3.0)
    };
    let energy = exact_sum(p.iter().map(|v| v * v));

    let mut sorted = p.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let min = sorted[0];
    let max = sorted[sorted.len() - 1];
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 0 {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    } else {
        sorted[mid]
    };

    // +0.0 folds -0.0 into 0.0 so equal values share a key.
    let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
    for v in p {
        *counts.entry((v + 0.0).to_bits()).or_default() += 1;
    }
    let mut entropy = 0.0;
    let mut uniformity = 0.0;
    for &c in counts.values() {
        let q = c as f64 / n;
        if q < 1.0 {
            entropy -= q * q.log2();
        }
        uniformity += q * q;
    }

    [
        area,
        mean,
        m2.sqrt(),
        skew,
        kurt,
        energy,
        entropy,
        max,
        exact_sum(dev.iter().map(|d| d.abs())) / n,
        median,
        min,
        max - min,
        (energy / n).sqrt(),
        uniformity,
    ]
}

/// Natural magnitude of each statistic of `p`, used as the floor of the
/// relative-error denominator so near-zero values are compared sensibly.
pub fn stats_scale(p: &[f64]) -> [f64; 14] {
    let amax = p.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let asum = p.iter().map(|v| v.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
    let esum = p.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    [
        asum, amax, amax, 1.0, 1.0, esum, 1.0, amax, amax, amax, amax, amax, amax, 1.0,
    ]
}

pub fn relative_error(got: f64, want: f64, scale: f64) -> f64 {
    (got - want).abs() / want.abs().max(scale)
}

/// Random test vector: mixes continuous values, small integer alphabets
/// (ties) and constants.
pub fn random_vector(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let len = if rng.gen_bool(0.3) {
        rng.gen_range(1..=20)
    } else {
        rng.gen_range(1..=10_000)
    };
    match rng.gen_range(0..4) {
        0 => (0..len).map(|_| rng.gen_range(-1e3..1e3)).collect(),
        1 => (0..len).map(|_| rng.gen_range(0..8) as f64).collect(),
        2 => {
            let c = rng.gen_range(-50.0..50.0);
            vec![c; len]
        }
        _ => (0..len)
            .map(|_| {
                let u: f64 = rng.gen_range(1e-6..1.0);
                (-u.ln()).powi(3)
            })
            .collect(),
    }
}

// ---------------------------------------------------------------- GLCM

/// Naive co-occurrence counting: every pixel, every in-bounds neighbour.
pub fn glcm_oracle(img: &GrayImage, dr: isize, dc: isize) -> BTreeMap<(u8, u8), u32> {
    let mut m = BTreeMap::new();
    for r in 0..img.height as isize {
        for c in 0..img.width as isize {
            let (r2, c2) = (r + dr, c + dc);
            if r2 < 0 || c2 < 0 || r2 >= img.height as isize || c2 >= img.width as isize {
                continue;
            }
            let a = img.get(r as usize, c as usize);
            let b = img.get(r2 as usize, c2 as usize);
            *m.entry((a, b)).or_default() += 1;
        }
    }
    m
}

// ---------------------------------------------------------------- eigen

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix (row-major
/// `n × n`). Returns eigenvalues descending and eigenvectors as columns of a
/// row-major `n × n` matrix.
pub fn jacobi_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        let diag: f64 = (0..n).map(|i| a[i * n + i] * a[i * n + i]).sum();
        if off <= 1e-30 * diag.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].partial_cmp(&a[i * n + i]).unwrap());
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vectors[k * n + new] = v[k * n + old];
        }
    }
    (values, vectors)
}

/// Scores of classical covariance PCA: centred data times the leading
/// eigenvectors of the sample covariance matrix.
pub fn covariance_pca_scores(x: &FeatureMatrix, k: usize) -> FeatureMatrix {
    let (n, d) = (x.rows, x.cols);
    let mean: Vec<f64> = (0..d).map(|j| x.column(j).iter().sum::<f64>() / n as f64).collect();
    let centred: Vec<Vec<f64>> = x
        .iter_rows()
        .map(|r| r.iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect();
    let mut cov = vec![0.0; d * d];
    for row in &centred {
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] += row[i] * row[j];
            }
        }
    }
    let (_, vectors) = jacobi_eigen(&cov, d);
    let mut out = FeatureMatrix::zeros(n, k);
    for (i, row) in centred.iter().enumerate() {
        for c in 0..k {
            out.data[i * k + c] = (0..d).map(|t| row[t] * vectors[t * d + c]).sum();
        }
    }
    out
}

// ---------------------------------------------------------------- SVM

/// Three well-separated Gaussian-ish blobs in 2-D.
pub fn three_blobs(rng: &mut ChaCha8Rng, per_class: usize) -> (FeatureMatrix, Vec<ClassLabel>) {
    let centres = [(-5.0, 0.0), (5.0, 0.0), (0.0, 8.0)];
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (class, &(cx, cy)) in ClassLabel::ALL.iter().zip(&centres) {
        for _ in 0..per_class {
            rows.push(vec![cx + rng.gen_range(-1.0..1.0), cy + rng.gen_range(-1.0..1.0)]);
            labels.push(*class);
        }
    }
    (FeatureMatrix::from_rows(&rows).unwrap(), labels)
}

// ---------------------------------------------------------------- images

/// Box blur with clamped borders.
fn box_blur(src: &[f64], w: usize, h: usize, radius: usize) -> Vec<f64> {
    let r = radius as isize;
    let mut out = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = 0.0;
            let mut cnt = 0.0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let yy = (y + dy).clamp(0, h as isize - 1) as usize;
                    let xx = (x + dx).clamp(0, w as isize - 1) as usize;
                    acc += src[yy * w + xx];
                    cnt += 1.0;
                }
            }
            out[y as usize * w + x as usize] = acc / cnt;
        }
    }
    out
}

fn to_u8(v: &[f64]) -> Vec<u8> {
    v.iter().map(|x| x.round().clamp(0.0, 255.0) as u8).collect()
}

/// Procedural texture for `class`: smoothed noise (covid), stripes
/// (normal) or blobs (pneumonia).
pub fn texture_image(class: ClassLabel, seed: u64, size: usize) -> GrayImage {
    let mut rng = rng(seed);
    let n = size * size;
    let noise: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let data: Vec<f64> = match class {
        ClassLabel::Covid => {
            let radius = rng.gen_range(2..5);
            let smooth = box_blur(&noise, size, size, radius);
            let gain = rng.gen_range(180.0..260.0);
            smooth.iter().map(|v| 128.0 + gain * v).collect()
        }
        ClassLabel::Normal => {
            let theta: f64 = rng.gen_range(0.0..std::f64::consts::PI);
            let period = rng.gen_range(8.0..20.0);
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            let amp = rng.gen_range(50.0..90.0);
            (0..n)
                .map(|i| {
                    let (y, x) = ((i / size) as f64, (i % size) as f64);
                    let t = (x * theta.cos() + y * theta.sin()) * std::f64::consts::TAU / period;
                    128.0 + amp * (t + phase).sin() + 12.0 * noise[i]
                })
                .collect()
        }
        ClassLabel::Pneumonia => {
            let count = rng.gen_range(6..14);
            let blobs: Vec<(f64, f64, f64, f64)> = (0..count)
                .map(|_| {
                    (
                        rng.gen_range(0.0..size as f64),
                        rng.gen_range(0.0..size as f64),
                        rng.gen_range(8.0..24.0),
                        rng.gen_range(60.0..120.0),
                    )
                })
                .collect();
            (0..n)
                .map(|i| {
                    let (y, x) = ((i / size) as f64, (i % size) as f64);
                    let bump: f64 = blobs
                        .iter()
                        .map(|&(by, bx, s, a)| {
                            a * (-((y - by).powi(2) + (x - bx).powi(2)) / (2.0 * s * s)).exp()
                        })
                        .sum();
                    60.0 + bump + 12.0 * noise[i]
                })
                .collect()
        }
    };
    GrayImage::new(size, size, to_u8(&data)).unwrap()
}

pub fn save_png(img: &GrayImage, path: &Path) {
    image::GrayImage::from_raw(img.width as u32, img.height as u32, img.data.clone())
        .unwrap()
        .save(path)
        .unwrap();
}

/// Write `per_class` texture images per class under `root/<class>/` and a
/// manifest CSV at `root/manifest.csv`. Returns the manifest path.
pub fn write_texture_dataset(root: &Path, per_class: usize, size: usize, seed: u64) -> PathBuf {
    let mut lines = vec!["id,path,label".to_string()];
    for (ci, class) in ClassLabel::ALL.iter().enumerate() {
        let dir = root.join(class.as_str());
        fs::create_dir_all(&dir).unwrap();
        for i in 0..per_class {
            let id = format!("{}_{i:04}", class.as_str());
            let img = texture_image(*class, seed * 1_000_003 + (ci * 100_000 + i) as u64, size);
            let rel = format!("{}/{id}.png", class.as_str());
            save_png(&img, &root.join(&rel));
            lines.push(format!("{id},{rel},{}", class.as_str()));
        }
    }
    let manifest = root.join("manifest.csv");
    fs::write(&manifest, lines.join("\n") + "\n").unwrap();
    manifest
}

// ---------------------------------------------------------------- stand-in deep features

pub const STANDIN_WIDTH: usize = 4096;

/// Fixed random convolution network: 7×7 average pool to 32×32, sixteen
/// seeded 3×3 filters with zero padding, ReLU, 2×2 max pool. 16×16×16 =
/// 4096 outputs, channel-last.
pub struct RandomConv {
    filters: Vec<[f64; 9]>,
    biases: Vec<f64>,
}

impl RandomConv {
    pub fn new(seed: u64) -> Self {
        let mut rng = rng(seed);
        let filters = (0..16)
            .map(|_| {
                let mut f = [0.0; 9];
                for v in &mut f {
                    *v = rng.gen_range(-1.0..1.0);
                }
                f
            })
            .collect();
        let biases = (0..16).map(|_| rng.gen_range(-0.1..0.1)).collect();
        Self { filters, biases }
    }

    pub fn features(&self, img: &GrayImage) -> Vec<f64> {
        assert_eq!((img.width, img.height), (224, 224));
        let mut pooled = vec![0.0; 32 * 32];
        for by in 0..32 {
            for bx in 0..32 {
                let mut acc = 0.0;
                for y in by * 7..by * 7 + 7 {
                    for x in bx * 7..bx * 7 + 7 {
                        acc += img.get(y, x) as f64;
                    }
                }
                pooled[by * 32 + bx] = acc / 49.0 / 255.0 - 0.5;
            }
        }
        let at = |y: isize, x: isize| {
            if (0..32).contains(&y) && (0..32).contains(&x) {
                pooled[y as usize * 32 + x as usize]
            } else {
                0.0
            }
        };
        let mut out = vec![0.0; STANDIN_WIDTH];
        for (f, (filter, bias)) in self.filters.iter().zip(&self.biases).enumerate() {
            let mut act = vec![0.0; 32 * 32];
            for y in 0..32isize {
                for x in 0..32isize {
                    let mut s = *bias;
                    for ky in 0..3isize {
                        for kx in 0..3isize {
                            s += filter[(ky * 3 + kx) as usize] * at(y + ky - 1, x + kx - 1);
                        }
                    }
                    act[y as usize * 32 + x as usize] = s.max(0.0);
                }
            }
            for py in 0..16 {
                for px in 0..16 {
                    let m = [
                        act[(2 * py) * 32 + 2 * px],
                        act[(2 * py) * 32 + 2 * px + 1],
                        act[(2 * py + 1) * 32 + 2 * px],
                        act[(2 * py + 1) * 32 + 2 * px + 1],
                    ]
                    .into_iter()
                    .fold(0.0f64, f64::max);
                    out[(py * 16 + px) * 16 + f] = m;
                }
            }
        }
        out
    }
}

/// Stand-in deep features for every manifest row, written as RFF1.
pub fn write_standin_features(manifest: &Path, out: &Path, seed: u64) {
    let ds = radfuse::pipeline::ingest(manifest).unwrap();
    let net = RandomConv::new(seed);
    let cfg = PreprocessConfig::default();
    let rows: Vec<Vec<f64>> = ds
        .samples
        .iter()
        .map(|s| net.features(&preprocess_image(&s.path, &cfg).unwrap().0))
        .collect();
    let matrix = FeatureMatrix::from_rows(&rows).unwrap();
    let file = FeatureFile::new(ds.ids(), matrix, "random-conv stand-in").with_layout(vec![GroupSpan {
        name: "deep".into(),
        offset: 0,
        len: STANDIN_WIDTH,
    }]);
    write_rff(out, &file).unwrap();
}
