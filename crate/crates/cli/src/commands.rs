use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use radfuse::deepfeat::DeepBackendConfig;
use radfuse::evalmetrics::{render_table, write_heatmap_png};
use radfuse::handcrafted::parse_groups;
use radfuse::pipeline::{
    extract_raw, fit_and_evaluate, fused_layout, ingest, load_model, prepare, recorded_test_split,
    sample_id_for_path, save_model, FeatureSources, Predictor, RunConfig, Scored,
};
use radfuse::preprocess::PreprocessConfig;
use radfuse::rff::{write_rff, FeatureFile, GroupSpan};
use radfuse::{ClassLabel, Error};
use serde_json::json;

use crate::exit::{code_for, CliError};
use crate::{
    DeepBackend, Dtype, EvalArgs, EvalSplit, ExtractArgs, OutputFormat, PredictArgs, TrainArgs,
};

const EXTRACTOR: &str = concat!("radfuse ", env!("CARGO_PKG_VERSION"));

fn require_exists(path: &Path, what: &str) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::config(format!("{what} {} does not exist", path.display())))
    }
}

fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    require_exists(path, "config")?;
    RunConfig::load(path).map_err(|e| match e {
        Error::Io { .. } => CliError::config(e.to_string()),
        other => other.into(),
    })
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::internal(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn stdout_line(value: &serde_json::Value) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    writeln!(out, "{value}")?;
    Ok(())
}

fn rff_dtype(d: Dtype) -> radfuse::rff::Dtype {
    match d {
        Dtype::F32 => radfuse::rff::Dtype::F32,
        Dtype::F64 => radfuse::rff::Dtype::F64,
    }
}

pub fn extract(a: ExtractArgs) -> Result<(), CliError> {
    require_exists(&a.manifest, "manifest")?;
    let groups = parse_groups(&a.groups)?;
    let preprocess = match &a.config {
        Some(p) => load_config(p)?.preprocess,
        None => PreprocessConfig::default(),
    };
    let deep_cfg = match a.deep_backend {
        Some(backend) => {
            let path = a.deep_path.clone().expect("required by clap");
            require_exists(&path, "deep backend file")?;
            let width = a.deep_width.expect("required by clap");
            let cfg = match backend {
                DeepBackend::Precomputed => DeepBackendConfig::Precomputed {
                    feature_path: path,
                    width,
                },
                DeepBackend::Onnx => DeepBackendConfig::Onnx {
                    model_path: path,
                    width,
                },
            };
            cfg.validate()?;
            Some(cfg)
        }
        None => None,
    };
    if groups.is_empty() && deep_cfg.is_none() {
        return Err(CliError::config("nothing to extract"));
    }

    let dataset = ingest(&a.manifest)?;
    let deep = deep_cfg.as_ref().map(|d| d.open()).transpose()?;
    let raw = extract_raw(
        &dataset.samples,
        &groups,
        &preprocess,
        FeatureSources {
            handcrafted_cache: None,
            deep: deep.as_deref(),
        },
    )?;

    let ids = raw.ids.clone();
    let hc = FeatureFile::new(ids.clone(), raw.handcrafted, format!("{EXTRACTOR} handcrafted"))
        .with_layout(fused_layout(&groups, None))
        .with_dtype(rff_dtype(a.dtype));
    let mut written = vec![json!({"path": a.out, "n_samples": hc.matrix.rows, "n_features": hc.matrix.cols})];
    if let (Some(d), Some(out)) = (raw.deep, &a.deep_out) {
        let width = d.cols;
        let file = FeatureFile::new(ids, d, format!("{EXTRACTOR} deep"))
            .with_layout(vec![GroupSpan {
                name: "deep".into(),
                offset: 0,
                len: width,
            }])
            .with_dtype(rff_dtype(a.dtype));
        write_rff(out, &file)?;
        written.push(json!({"path": out, "n_samples": file.matrix.rows, "n_features": width}));
    }
    write_rff(&a.out, &hc)?;
    log::info!("wrote {} rows to {}", hc.matrix.rows, a.out.display());
    stdout_line(&json!({ "written": written }))
}

pub fn train(a: TrainArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&a.config)?;
    if let Some(p) = a.model_out {
        cfg.paths.model_out = Some(p);
    }
    if let Some(p) = a.report_out {
        cfg.paths.report_out = Some(p);
    }
    if let Some(s) = a.seed {
        cfg.svm.seed = s;
    }
    if let Some(s) = a.split_seed {
        cfg.split.seed = s;
    }
    if let Some(k) = a.k {
        cfg.kpca.k = k;
    }
    cfg.validate()?;
    let model_out = cfg
        .paths
        .model_out
        .clone()
        .ok_or_else(|| CliError::config("no model output path (paths.model_out or --model-out)"))?;
    require_exists(&cfg.paths.manifest, "manifest")?;

    let name = a.name.unwrap_or_else(|| {
        model_out
            .file_stem()
            .map_or("model".into(), |s| s.to_string_lossy().into_owned())
    });
    let data = prepare(&cfg)?;
    let outcome = fit_and_evaluate(&cfg, &data, &name)?;
    save_model(&outcome.model, &model_out)?;
    log::info!("saved model to {}", model_out.display());
    eprint!("{}", render_table(std::slice::from_ref(&outcome.test_report)));

    let report = json!({
        "model": model_out,
        "train": outcome.train_report,
        "test": outcome.test_report,
    });
    if let Some(p) = &cfg.paths.report_out {
        write_json(p, &report)?;
    }
    stdout_line(&report)
}

fn suffixed(path: &Path, name: &str, many: bool) -> PathBuf {
    if !many {
        return path.to_path_buf();
    }
    let stem = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    let file = match path.extension() {
        Some(ext) => format!("{stem}-{name}.{}", ext.to_string_lossy()),
        None => format!("{stem}-{name}"),
    };
    path.with_file_name(file)
}

pub fn eval(a: EvalArgs) -> Result<(), CliError> {
    require_exists(&a.manifest, "manifest")?;
    for m in &a.models {
        require_exists(m, "model")?;
    }
    if !a.names.is_empty() && a.names.len() != a.models.len() {
        return Err(CliError::config("give one --name per --model"));
    }
    let dataset = ingest(&a.manifest)?;
    let many = a.models.len() > 1;
    let mut reports = Vec::new();
    for (i, path) in a.models.iter().enumerate() {
        let name = a.names.get(i).cloned().unwrap_or_else(|| {
            path.file_stem()
                .map_or(format!("model{i}"), |s| s.to_string_lossy().into_owned())
        });
        let mut model = load_model(path)?;
        if let Some(p) = &a.deep_path {
            model = model.with_deep_path(p.clone());
        }
        let samples = match a.split {
            EvalSplit::All => dataset.samples.clone(),
            EvalSplit::Test => recorded_test_split(&model, &dataset)?,
        };
        let predictor = Predictor::new(model)?;
        let (report, _) = predictor.evaluate(&name, &samples)?;
        if let Some(p) = &a.cm_csv {
            let p = suffixed(p, &name, many);
            fs::write(&p, report.confusion_matrix.to_csv())
                .map_err(|e| CliError::data(format!("{}: {e}", p.display())))?;
        }
        if let Some(p) = &a.cm_png {
            write_heatmap_png(&report.confusion_matrix, &suffixed(p, &name, many))?;
        }
        reports.push(report);
    }
    eprint!("{}", render_table(&reports));
    match &a.out {
        Some(p) => write_json(p, &reports),
        None => stdout_line(&serde_json::to_value(&reports).map_err(|e| CliError::internal(e.to_string()))?),
    }
}

fn scores_json(s: &Scored) -> serde_json::Value {
    let mut scores = serde_json::Map::new();
    for (c, v) in ClassLabel::ALL.iter().zip(s.scores) {
        scores.insert(c.as_str().into(), json!(v));
    }
    serde_json::Value::Object(scores)
}

fn error_kind(e: &Error) -> &'static str {
    match e.root() {
        Error::Decode { .. } => "decode",
        Error::Format { .. } => "format",
        Error::Io { .. } => "io",
        Error::Lookup(_) => "lookup",
        Error::Provider(_) => "provider",
        _ => "other",
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn predict(a: PredictArgs) -> Result<(), CliError> {
    require_exists(&a.model, "model")?;
    let mut model = load_model(&a.model)?;
    if let Some(p) = a.deep_path {
        model = model.with_deep_path(p);
    }
    let predictor = Predictor::new(model)?;
    let results = predictor.predict_each(&a.images);

    let mut out = io::stdout().lock();
    if a.format == OutputFormat::Csv {
        writeln!(out, "path,id,label,covid,normal,pneumonia,error")?;
    }
    let mut failed = 0;
    for (path, result) in a.images.iter().zip(&results) {
        let id = sample_id_for_path(path);
        let shown = path.display().to_string();
        match (a.format, result) {
            (OutputFormat::Jsonl, Ok(s)) => writeln!(
                out,
                "{}",
                json!({"path": shown, "id": id, "label": s.label, "scores": scores_json(s)})
            )?,
            (OutputFormat::Jsonl, Err(e)) => writeln!(
                out,
                "{}",
                json!({"path": shown, "id": id, "error": {"kind": error_kind(e), "code": code_for(e), "message": e.to_string()}})
            )?,
            (OutputFormat::Csv, Ok(s)) => writeln!(
                out,
                "{},{},{},{},{},{},",
                csv_field(&shown),
                csv_field(&id),
                s.label,
                s.scores[0],
                s.scores[1],
                s.scores[2]
            )?,
            (OutputFormat::Csv, Err(e)) => writeln!(
                out,
                "{},{},,,,,{}",
                csv_field(&shown),
                csv_field(&id),
                csv_field(&e.to_string())
            )?,
        }
        if let Err(e) = result {
            log::error!("{}: {e}", path.display());
            failed += 1;
        }
    }
    out.flush()?;
    if failed > 0 {
        return Err(CliError::data(format!("{failed} of {} images failed", a.images.len())));
    }
    Ok(())
}

