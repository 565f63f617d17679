//! Confusion matrix, unweighted per-class averages and normal-approximation
//! confidence intervals.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{ClassLabel, NUM_CLASSES};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.96;

/// Rows are true classes, columns predicted classes, both in
/// [`ClassLabel::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix(pub [[u64; NUM_CLASSES]; NUM_CLASSES]);

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.0.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_CLASSES).map(|i| self.0[i][i]).sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.0[i].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        self.0.iter().map(|r| r[j]).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("true\\pred");
        for c in ClassLabel::ALL {
            let _ = write!(s, ",{c}");
        }
        s.push('\n');
        for (i, row) in self.0.iter().enumerate() {
            s.push_str(ClassLabel::ALL[i].as_str());
            for v in row {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }
}

pub fn confusion_matrix(y_true: &[ClassLabel], y_pred: &[ClassLabel]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::arg(format!(
            "{} true labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (t, p) in y_true.iter().zip(y_pred) {
        cm.0[t.index()][p.index()] += 1;
    }
    Ok(cm)
}

/// Label-string variant that rejects anything outside the class set.
pub fn confusion_matrix_from_strings(y_true: &[&str], y_pred: &[&str]) -> Result<ConfusionMatrix> {
    let parse = |v: &[&str]| -> Result<Vec<ClassLabel>> {
        v.iter()
            .map(|s| s.parse().map_err(|_| Error::arg(format!("unknown label `{s}`"))))
            .collect()
    };
    confusion_matrix(&parse(y_true)?, &parse(y_pred)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: ClassLabel,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    /// Per-class metrics whose denominator was zero and were set to 0.
    pub warnings: Vec<String>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn macro_metrics(cm: &ConfusionMatrix) -> Result<MacroMetrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::arg("empty confusion matrix"));
    }
    let mut warnings = Vec::new();
    let mut per_class = Vec::with_capacity(NUM_CLASSES);
    for class in ClassLabel::ALL {
        let i = class.index();
        let tp = cm.0[i][i];
        let precision = ratio(tp, cm.col_sum(i)).unwrap_or_else(|| {
            warnings.push(format!("precision of {class} undefined (no predictions); using 0"));
            0.0
        });
        let recall = ratio(tp, cm.row_sum(i)).unwrap_or_else(|| {
            warnings.push(format!("recall of {class} undefined (no samples); using 0"));
            0.0
        });
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        per_class.push(ClassMetrics {
            class,
            precision,
            recall,
            f1,
            support: cm.row_sum(i),
        });
    }
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / NUM_CLASSES as f64;
    Ok(MacroMetrics {
        accuracy: cm.trace() as f64 / total as f64,
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
        per_class,
        warnings,
    })
}

/// Half-width `1.96 √(m (1 - m) / n)` of the 95% normal-approximation
/// interval.
pub fn confidence_interval(metric: f64, n: u64) -> Result<f64> {
    if !(0.0..=1.0).contains(&metric) {
        return Err(Error::arg(format!("metric {metric} outside [0, 1]")));
    }
    if n == 0 {
        return Err(Error::arg("confidence interval over zero samples"));
    }
    Ok(Z_95 * (metric * (1.0 - metric) / n as f64).sqrt())
}

/// False-negative and false-positive rates of the covid class against the
/// other two. `None` marks an undefined rate.
pub fn covid_rates(cm: &ConfusionMatrix) -> (Option<f64>, Option<f64>) {
    let c = ClassLabel::Covid.index();
    let tp = cm.0[c][c];
    let positives = cm.row_sum(c);
    let negatives = cm.total() - positives;
    let fnr = ratio(positives - tp, positives);
    let fpr = ratio(cm.col_sum(c) - tp, negatives);
    (fnr, fpr)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub ci95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub name: String,
    pub n_test: u64,
    pub accuracy: Estimate,
    pub macro_f1: Estimate,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub per_class: Vec<ClassMetrics>,
    pub covid_false_negative_rate: Option<f64>,
    pub covid_false_positive_rate: Option<f64>,
    pub confusion_matrix: ConfusionMatrix,
    pub warnings: Vec<String>,
}

impl EvalReport {
    pub fn from_confusion(name: impl Into<String>, cm: ConfusionMatrix) -> Result<Self> {
        let m = macro_metrics(&cm)?;
        let n = cm.total();
        let (fnr, fpr) = covid_rates(&cm);
        Ok(Self {
            name: name.into(),
            n_test: n,
            accuracy: Estimate {
                value: m.accuracy,
                ci95: confidence_interval(m.accuracy, n)?,
            },
            macro_f1: Estimate {
                value: m.macro_f1,
                ci95: confidence_interval(m.macro_f1, n)?,
            },
            macro_precision: m.macro_precision,
            macro_recall: m.macro_recall,
            per_class: m.per_class,
            covid_false_negative_rate: fnr,
            covid_false_positive_rate: fpr,
            confusion_matrix: cm,
            warnings: m.warnings,
        })
    }

    pub fn evaluate(
        name: impl Into<String>,
        y_true: &[ClassLabel],
        y_pred: &[ClassLabel],
    ) -> Result<Self> {
        Self::from_confusion(name, confusion_matrix(y_true, y_pred)?)
    }
}

/// Aligned text table with one row per report.
pub fn render_table(reports: &[EvalReport]) -> String {
    let width = reports
        .iter()
        .map(|r| r.name.len())
        .max()
        .unwrap_or(0)
        .max("Model".len());
    let pct = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{:.2}%", 100.0 * x));
    let mut s = format!(
        "{:<width$}  {:>15}  {:>15}  {:>8}  {:>8}  {:>6}\n",
        "Model", "Accuracy", "F1-Score", "FNR", "FPR", "n"
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{:<width$}  {:>15}  {:>15}  {:>8}  {:>8}  {:>6}",
            r.name,
            format!("{:.3} ± {:.3}", r.accuracy.value, r.accuracy.ci95),
            format!("{:.3} ± {:.3}", r.macro_f1.value, r.macro_f1.ci95),
            pct(r.covid_false_negative_rate),
            pct(r.covid_false_positive_rate),
            r.n_test,
        );
    }
    s
}

/// Row-normalized heatmap, one 96-pixel square per cell on a light grid.
pub fn write_heatmap_png(cm: &ConfusionMatrix, path: &Path) -> Result<()> {
    const CELL: u32 = 96;
    const GAP: u32 = 4;
    let side = NUM_CLASSES as u32 * (CELL + GAP) + GAP;
    let mut img = image::RgbImage::from_pixel(side, side, image::Rgb([230, 230, 230]));
    for i in 0..NUM_CLASSES {
        let row_total = cm.row_sum(i).max(1) as f64;
        for j in 0..NUM_CLASSES {
            let t = cm.0[i][j] as f64 / row_total;
            let shade = |lo: f64, hi: f64| (lo + (hi - lo) * t).round() as u8;
            let colour = image::Rgb([shade(255.0, 8.0), shade(255.0, 48.0), shade(255.0, 107.0)]);
            let x0 = GAP + j as u32 * (CELL + GAP);
            let y0 = GAP + i as u32 * (CELL + GAP);
            for y in y0..y0 + CELL {
                for x in x0..x0 + CELL {
                    img.put_pixel(x, y, colour);
                }
            }
        }
    }
    img.save(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    })
}
