mod common;

use std::path::{Path, PathBuf};
use std::sync::Mutex;

use radfuse::deepfeat::{DeepBackendConfig, KernelSpec};
use radfuse::handcrafted::{extract_groups, FeatureGroup};
use radfuse::matrix::FeatureMatrix;
use radfuse::pipeline::*;
use radfuse::preprocess::{preprocess_image, PreprocessConfig};
use radfuse::rff::{write_rff, FeatureFile};
use radfuse::{ClassLabel, Error};

struct Toy {
    _dir: tempfile::TempDir,
    root: PathBuf,
    manifest: PathBuf,
    deep: PathBuf,
}

/// 8 images per class at 64×64 plus stand-in deep features of width 12.
fn toy() -> Toy {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let manifest = common::write_texture_dataset(&root, 8, 64, 5);
    let ds = ingest(&manifest).unwrap();
    let rows: Vec<Vec<f64>> = ds
        .samples
        .iter()
        .map(|s| {
            let (g, _) = preprocess_image(&s.path, &PreprocessConfig::default()).unwrap();
            (0..12)
                .map(|k| {
                    let band = &g.data[k * g.data.len() / 12..(k + 1) * g.data.len() / 12];
                    band.iter().map(|&v| v as f64).sum::<f64>() / band.len() as f64
                        + s.label.index() as f64 * 10.0
                })
                .collect()
        })
        .collect();
    let deep = root.join("deep.rff");
    write_rff(&deep, &FeatureFile::new(ds.ids(), FeatureMatrix::from_rows(&rows).unwrap(), "toy")).unwrap();
    Toy {
        _dir: dir,
        root,
        manifest,
        deep,
    }
}

fn config(t: &Toy, deep: bool, k: usize) -> RunConfig {
    RunConfig {
        preprocess: PreprocessConfig::default(),
        features: FeatureConfig {
            groups: FeatureGroup::ALL.to_vec(),
            deep: deep.then(|| DeepBackendConfig::Precomputed {
                feature_path: t.deep.clone(),
                width: 12,
            }),
        },
        kpca: KpcaConfig {
            k,
            kernel: KernelSpec::Linear,
        },
        svm: Default::default(),
        split: SplitSpec {
            train_fraction: 0.75,
            seed: 3,
            stratified: true,
        },
        paths: PathsConfig {
            manifest: t.manifest.clone(),
            ..Default::default()
        },
    }
}

#[test]
fn ingest_directory_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    for (class, n) in [("covid", 2), ("normal", 3), ("pneumonia", 4)] {
        std::fs::create_dir_all(dir.path().join(class)).unwrap();
        for i in 0..n {
            let img = common::texture_image(ClassLabel::Normal, i, 16);
            common::save_png(&img, &dir.path().join(class).join(format!("{class}{i}.png")));
        }
    }
    let ds = ingest(dir.path()).unwrap();
    assert_eq!(ds.len(), 9);
    assert_eq!(ds.class_counts(), [2, 3, 4]);

    let manifest = dir.path().join("m.csv");
    std::fs::write(&manifest, "id,path,label\na,covid/covid0.png,Covid\nb,normal/normal0.png,NORMAL\n").unwrap();
    let ds = ingest(&manifest).unwrap();
    assert_eq!(ds.labels(), vec![ClassLabel::Covid, ClassLabel::Normal]);

    std::fs::write(&manifest, "id,path,label\na,covid/covid0.png,covid\na,covid/covid1.png,covid\n").unwrap();
    let err = ingest(&manifest).unwrap_err().to_string();
    assert!(err.contains("`a`") || err.contains("a"), "{err}");

    std::fs::write(&manifest, "id,path,label\na,covid/covid0.png,flu\n").unwrap();
    assert!(ingest(&manifest).is_err());
    std::fs::write(&manifest, "id,path,label\na,covid/nope.png,covid\n").unwrap();
    assert!(ingest(&manifest).is_err());
}

#[test]
fn feature_table_widths_and_order() {
    let t = toy();
    let data = prepare(&config(&t, true, 5)).unwrap();
    assert_eq!(data.raw.handcrafted.cols, 308);
    assert_eq!(data.raw.ids, data.dataset.ids());

    let table = build_feature_table(&data.raw, &FeatureGroup::ALL, None);
    assert!(table.is_err(), "deep block without a kernel PCA model");
    let hc_only = data.without_deep();
    let table = build_feature_table(&hc_only.raw, &FeatureGroup::ALL, None).unwrap();
    assert_eq!(table.matrix.cols, 308);
    assert_eq!(table.layout.iter().map(|s| s.len).collect::<Vec<_>>(), vec![14, 56, 56, 14, 112, 56]);

    let out = fit_and_evaluate(&config(&t, true, 5), &data, "fused").unwrap();
    assert_eq!(out.model.fused_width(), 313);
    assert_eq!(out.model.layout.last().unwrap().name, DEEP_BLOCK);
    assert_eq!(out.train_report.train_accuracy, 1.0);
}

#[test]
fn extraction_order_does_not_depend_on_thread_count() {
    let t = toy();
    let ds = ingest(&t.manifest).unwrap();
    let groups = [FeatureGroup::Texture, FeatureGroup::Wavelet];
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| extract_raw(&ds.samples, &groups, &PreprocessConfig::default(), FeatureSources::default()).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn handcrafted_cache_matches_direct_extraction() {
    let t = toy();
    let ds = ingest(&t.manifest).unwrap();
    let all = extract_raw(&ds.samples, &FeatureGroup::ALL, &PreprocessConfig::default(), FeatureSources::default()).unwrap();
    let file = FeatureFile::new(all.ids.clone(), all.handcrafted.clone(), "test")
        .with_layout(fused_layout(&FeatureGroup::ALL, None));
    let groups = [FeatureGroup::Gldm, FeatureGroup::Lbp];
    let cache = HandcraftedCache::from_file(file, &groups).unwrap();
    let cached = extract_raw(
        &ds.samples,
        &groups,
        &PreprocessConfig::default(),
        FeatureSources { handcrafted_cache: Some(&cache), deep: None },
    )
    .unwrap();
    let (g, _) = preprocess_image(&ds.samples[3].path, &PreprocessConfig::default()).unwrap();
    assert_eq!(cached.handcrafted.row(3), extract_groups(&g, &groups).unwrap().as_slice());
}

#[test]
fn training_is_byte_deterministic_and_round_trips() {
    let t = toy();
    let cfg = config(&t, true, 4);
    let a = run_experiment(&cfg, "a").unwrap();
    let b = run_experiment(&cfg, "b").unwrap();
    let bytes = model_to_bytes(&a.model).unwrap();
    assert_eq!(bytes, model_to_bytes(&b.model).unwrap());

    let path = t.root.join("model.json");
    save_model(&a.model, &path).unwrap();
    let loaded = load_model(&path).unwrap();
    assert_eq!(loaded, a.model);
    assert_eq!(model_to_bytes(&loaded).unwrap(), bytes);
}

#[test]
fn tampered_and_old_model_files_are_rejected() {
    let t = toy();
    let out = run_experiment(&config(&t, false, 1), "m").unwrap();
    let text = String::from_utf8(model_to_bytes(&out.model).unwrap()).unwrap();
    let origin = Path::new("m.json");

    let pos = text.find("\"bias\":").unwrap() + 7;
    let mut tampered = text.clone().into_bytes();
    tampered[pos] = if tampered[pos] == b'1' { b'2' } else { b'1' };
    assert!(matches!(model_from_bytes(&tampered, origin), Err(Error::Checksum(_))));

    let old = text.replacen("\"version\":1", "\"version\":0", 1);
    assert!(matches!(
        model_from_bytes(old.as_bytes(), origin),
        Err(Error::Version { found: 0, .. })
    ));
    assert!(model_from_bytes(b"{\"format\":\"other\"}", origin).is_err());
}

struct Recorder(Mutex<Vec<(FitStage, Vec<String>)>>);

impl FitAudit for Recorder {
    fn observe(&self, stage: FitStage, ids: &[String]) -> radfuse::Result<()> {
        self.0.lock().unwrap().push((stage, ids.to_vec()));
        Ok(())
    }
}

#[test]
fn fits_only_see_training_rows() {
    let t = toy();
    let cfg = config(&t, true, 4);
    let data = prepare(&cfg).unwrap();
    let train = data.raw.select(&data.split.train);
    let rec = Recorder(Mutex::new(Vec::new()));
    train_pipeline(&train, &data.train_labels(), &cfg, &rec).unwrap();
    let seen = rec.0.into_inner().unwrap();
    assert_eq!(
        seen.iter().map(|(s, _)| *s).collect::<Vec<_>>(),
        vec![FitStage::Kpca, FitStage::Standardizer, FitStage::Svm]
    );
    let test_ids = data.test_ids();
    for (_, ids) in &seen {
        assert!(ids.iter().all(|id| !test_ids.contains(id)));
    }

    // Feeding every row trips the guard.
    let guard = HoldoutGuard::new(test_ids.clone());
    let labels = data.dataset.labels();
    let err = train_pipeline(&data.raw, &labels, &cfg, &guard).unwrap_err();
    assert!(matches!(err, Error::Leakage { .. }), "{err}");
}

#[test]
fn oversized_k_is_clamped_with_a_warning() {
    let t = toy();
    let out = run_experiment(&config(&t, true, 1000), "big-k").unwrap();
    let n_train = out.train_report.n_train;
    assert!(out.train_report.effective_k.unwrap() <= n_train - 1);
    assert!(out.train_report.warnings.iter().any(|w| w.contains("kpca.k")));
}

#[test]
fn predictor_scores_images() {
    let t = toy();
    let out = run_experiment(&config(&t, true, 4), "p").unwrap();
    let predictor = Predictor::new(out.model.clone()).unwrap();
    let ds = ingest(&t.manifest).unwrap();
    let split = split(&ds, &out.model.provenance.split.clone().unwrap()).unwrap();
    for &i in &split.train {
        let s = &ds.samples[i];
        let a = predictor.predict(&s.path).unwrap();
        assert_eq!(a.label, s.label, "{}", s.id);
        assert_eq!(a, predictor.predict(&s.path).unwrap());
    }

    let broken = t.root.join("covid_0000.png");
    std::fs::write(&broken, b"\x89PNG\r\n\x1a\nnot really").unwrap();
    assert!(matches!(predictor.predict(&broken), Err(Error::Decode { .. })));

    let results = predictor.predict_each(&[ds.samples[1].path.clone(), broken]);
    assert!(results[0].is_ok() && results[1].is_err());

    let test_samples = recorded_test_split(&out.model, &ds).unwrap();
    let (report, _) = predictor.evaluate("p", &test_samples).unwrap();
    assert_eq!(report, out.test_report.clone().renamed("p"));
}

trait Renamed {
    fn renamed(self, name: &str) -> Self;
}

impl Renamed for radfuse::evalmetrics::EvalReport {
    fn renamed(mut self, name: &str) -> Self {
        self.name = name.into();
        self
    }
}
