mod common;

use proptest::prelude::*;
use radfuse::classifier::argmax_label;
use radfuse::evalmetrics::{confidence_interval, confusion_matrix, macro_metrics};
use radfuse::handcrafted::{glcm_matrix, lbp_codes, GlcmDirection, LBP_RADII};
use radfuse::matrix::FeatureMatrix;
use radfuse::pipeline::{split, LabeledDataset, Sample, SplitSpec};
use radfuse::preprocess::{clahe, to_model_input, ClaheConfig, GrayImage, IMAGENET_BGR_MEANS};
use radfuse::rff::{read_rff, write_rff, FeatureFile};
use radfuse::stats::compute_stats;
use radfuse::ClassLabel;

fn image(max_side: usize, max_level: u8) -> impl Strategy<Value = GrayImage> {
    (1..=max_side, 1..=max_side).prop_flat_map(move |(w, h)| {
        proptest::collection::vec(0..=max_level, w * h)
            .prop_map(move |data| GrayImage::new(w, h, data).unwrap())
    })
}

fn label() -> impl Strategy<Value = ClassLabel> {
    (0..3usize).prop_map(|i| ClassLabel::from_index(i).unwrap())
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(scale)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stats_permutation_invariant(mut p in proptest::collection::vec(-1e3f64..1e3, 1..200), seed in any::<u64>()) {
        let before = compute_stats(&p).unwrap().to_array();
        use rand::seq::SliceRandom;
        p.shuffle(&mut common::rng(seed));
        let after = compute_stats(&p).unwrap().to_array();
        let scale = common::stats_scale(&p);
        for k in 0..14 {
            prop_assert!(close(before[k], after[k], scale[k]), "stat {}: {} vs {}", k, before[k], after[k]);
        }
    }

    #[test]
    fn stats_shift(p in proptest::collection::vec(-500i32..500, 1..200), c in -1000i32..1000) {
        let base: Vec<f64> = p.iter().map(|&v| v as f64).collect();
        let shifted: Vec<f64> = p.iter().map(|&v| (v + c) as f64).collect();
        let a = compute_stats(&base).unwrap();
        let b = compute_stats(&shifted).unwrap();
        let c = c as f64;
        let s = 2000.0;
        prop_assert!(close(b.mean, a.mean + c, s));
        prop_assert_eq!(b.median, a.median + c);
        prop_assert_eq!(b.min, a.min + c);
        prop_assert_eq!(b.max, a.max + c);
        prop_assert!(close(b.std, a.std, s));
        prop_assert!(close(b.mad, a.mad, s));
        prop_assert!((b.skewness - a.skewness).abs() <= 1e-6);
        prop_assert!((b.kurtosis - a.kurtosis).abs() <= 1e-6);
        prop_assert_eq!(b.range, a.range);
        prop_assert_eq!(b.entropy, a.entropy);
        prop_assert_eq!(b.uniformity, a.uniformity);
    }

    #[test]
    fn stats_scale(p in proptest::collection::vec(-1e3f64..1e3, 1..200), e in -4i32..5) {
        let s = 2f64.powi(e);
        let scaled: Vec<f64> = p.iter().map(|v| v * s).collect();
        let a = compute_stats(&p).unwrap();
        let b = compute_stats(&scaled).unwrap();
        prop_assert!(close(b.std, s * a.std, 1e3 * s));
        prop_assert!(close(b.mad, s * a.mad, 1e3 * s));
        prop_assert_eq!(b.range, s * a.range);
        prop_assert_eq!(b.energy, s * s * a.energy);
        prop_assert!(close(b.skewness, a.skewness, 1.0));
        prop_assert!(close(b.kurtosis, a.kurtosis, 1.0));
        prop_assert_eq!(b.entropy, a.entropy);
        prop_assert_eq!(b.uniformity, a.uniformity);
    }

    #[test]
    fn stats_bounds(p in proptest::collection::vec(0u8..16, 1..300)) {
        let v: Vec<f64> = p.iter().map(|&x| x as f64).collect();
        let s = compute_stats(&v).unwrap();
        let n = v.len() as f64;
        prop_assert!(s.min <= s.median && s.median <= s.max);
        prop_assert!(s.entropy >= 0.0 && s.entropy <= n.log2() + 1e-12);
        prop_assert!(s.uniformity >= 1.0 / n - 1e-12 && s.uniformity <= 1.0 + 1e-12);
        prop_assert!(s.rms + 1e-12 >= s.mean.abs());
    }

    #[test]
    fn glcm_matches_naive_counting(img in image(12, 255)) {
        for dir in GlcmDirection::ALL {
            let (dr, dc) = dir.offset();
            let oracle = common::glcm_oracle(&img, dr, dc);
            let got = glcm_matrix(&img, dir);
            let expected_total = (img.height.saturating_sub(dr.unsigned_abs()))
                * (img.width.saturating_sub(dc.unsigned_abs()));
            prop_assert_eq!(got.total(), expected_total as u64);
            for (&(a, b), &c) in &oracle {
                prop_assert_eq!(got.get(a, b), c);
            }
            prop_assert_eq!(got.counts.iter().filter(|&&c| c > 0).count(), oracle.len());
        }
    }

    #[test]
    fn lbp_invariant_to_additive_shift(img in image(20, 200), c in 0u8..=55) {
        let shifted = GrayImage::new(img.width, img.height, img.data.iter().map(|&v| v + c).collect()).unwrap();
        for r in LBP_RADII {
            prop_assert_eq!(lbp_codes(&img, r), lbp_codes(&shifted, r));
        }
    }

    #[test]
    fn clahe_constant_images_stay_constant(w in 1usize..48, h in 1usize..48, v in any::<u8>()) {
        let out = clahe(&GrayImage::filled(w, h, v), &ClaheConfig::default());
        prop_assert!(out.data.iter().all(|&x| x == out.data[0]));
    }

    #[test]
    fn clahe_is_deterministic(img in image(40, 255)) {
        let cfg = ClaheConfig { tile_grid: [4, 4], clip_limit: 2.0 };
        prop_assert_eq!(clahe(&img, &cfg), clahe(&img, &cfg));
    }

    #[test]
    fn model_input_channels_differ_by_constants(img in image(16, 255)) {
        let t = to_model_input(&img, IMAGENET_BGR_MEANS);
        for r in 0..img.height {
            for c in 0..img.width {
                for (i, j) in [(0, 1), (1, 2), (0, 2)] {
                    let d = t.get(r, c, i) - t.get(r, c, j);
                    let want = (IMAGENET_BGR_MEANS[j] - IMAGENET_BGR_MEANS[i]) as f32;
                    prop_assert!((d - want).abs() < 1e-4);
                }
            }
        }
    }

    #[test]
    fn split_is_disjoint_covering_and_stratified(
        counts in [2usize..60, 2usize..60, 2usize..60],
        seed in any::<u64>(),
        fraction in 0.3f64..0.9,
    ) {
        let mut samples = Vec::new();
        for (class, &n) in ClassLabel::ALL.iter().zip(&counts) {
            for i in 0..n {
                let id = format!("{}{i}", class.as_str());
                samples.push(Sample { path: id.clone().into(), id, label: *class });
            }
        }
        let ds = LabeledDataset::new(samples).unwrap();
        let spec = SplitSpec { train_fraction: fraction, seed, stratified: true };
        let s = split(&ds, &spec).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..ds.len()).collect::<Vec<_>>());
        prop_assert_eq!(s.train.len() as f64, (fraction * ds.len() as f64).round());
        for class in ClassLabel::ALL {
            let n = counts[class.index()] as f64;
            let k = s.train.iter().filter(|&&i| ds.samples[i].label == class).count() as f64;
            prop_assert!((k - fraction * n).abs() <= 1.0 + 1e-9, "class {} {} of {}", class, k, n);
        }
        prop_assert_eq!(&s, &split(&ds, &spec).unwrap());
    }

    #[test]
    fn confusion_and_metrics_bounds(pairs in proptest::collection::vec((label(), label()), 1..100)) {
        let (t, p): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let cm = confusion_matrix(&t, &p).unwrap();
        prop_assert_eq!(cm.total(), t.len() as u64);
        let m = macro_metrics(&cm).unwrap();
        for v in [m.accuracy, m.macro_f1, m.macro_precision, m.macro_recall] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn confidence_interval_symmetric_and_peaked(m in 0.0f64..=1.0, n in 1u64..5000) {
        let a = confidence_interval(m, n).unwrap();
        let b = confidence_interval(1.0 - m, n).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
        prop_assert!(a <= confidence_interval(0.5, n).unwrap() + 1e-15);
    }

    #[test]
    fn argmax_invariant_under_monotone_map(s in [-1e3f64..1e3, -1e3f64..1e3, -1e3f64..1e3]) {
        let mapped = s.map(|v| (v / 100.0).exp() * 3.0 + 7.0);
        prop_assert_eq!(argmax_label(&s), argmax_label(&mapped));
    }

    #[test]
    fn rff_round_trip(rows in 1usize..8, cols in 1usize..8, seed in any::<u64>()) {
        use rand::Rng;
        let mut r = common::rng(seed);
        let data: Vec<f64> = (0..rows * cols).map(|_| r.gen_range(-1e6..1e6)).collect();
        let m = FeatureMatrix::from_vec(rows, cols, data).unwrap();
        let ids: Vec<String> = (0..rows).map(|i| format!("s{i}")).collect();
        let file = FeatureFile::new(ids, m, "prop");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.rff");
        write_rff(&path, &file).unwrap();
        prop_assert_eq!(read_rff(&path).unwrap(), file);
    }
}
