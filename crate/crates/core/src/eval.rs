//! Classification metrics, multi-run aggregation and the comparison table.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no samples to evaluate")]
    Empty,
    #[error("{labels} labels but {preds} predictions")]
    LengthMismatch { labels: usize, preds: usize },
    #[error("class index {0} is outside the class list")]
    UnknownClass(usize),
    #[error("cannot aggregate reports: {0}")]
    Mismatch(String),
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub class_names: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn predicted(&self, class: usize) -> u64 {
        self.counts.iter().map(|row| row[class]).sum()
    }
}

pub fn confusion(
    labels: &[usize],
    preds: &[usize],
    class_names: &[String],
) -> Result<ConfusionMatrix, EvalError> {
    if labels.len() != preds.len() {
        return Err(EvalError::LengthMismatch {
            labels: labels.len(),
            preds: preds.len(),
        });
    }
    if labels.is_empty() {
        return Err(EvalError::Empty);
    }
    let c = class_names.len();
    let mut counts = vec![vec![0u64; c]; c];
    for (&l, &p) in labels.iter().zip(preds) {
        if l >= c {
            return Err(EvalError::UnknownClass(l));
        }
        if p >= c {
            return Err(EvalError::UnknownClass(p));
        }
        counts[l][p] += 1;
    }
    Ok(ConfusionMatrix {
        class_names: class_names.to_vec(),
        counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Machine identifier of the model configuration, e.g. `mfcc+cnn`.
    pub config: String,
    /// Table label, e.g. `MFCC + CNN`.
    pub display_name: String,
    pub seeds: Vec<u64>,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    pub confusion: ConfusionMatrix,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Sum in ascending order so that averages do not depend on input order.
fn order_free_mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

fn f1_score(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Accuracy, per-class precision/recall/F1 (0 where a denominator is 0), and
/// their macro and support-weighted averages.
pub fn metrics(
    cm: &ConfusionMatrix,
    config: impl Into<String>,
    display_name: impl Into<String>,
    seeds: Vec<u64>,
) -> Result<EvalReport, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::Empty);
    }
    let per_class: Vec<ClassMetrics> = (0..cm.n_classes())
        .map(|i| {
            let tp = cm.counts[i][i];
            let precision = ratio(tp, cm.predicted(i));
            let recall = ratio(tp, cm.support(i));
            ClassMetrics {
                name: cm.class_names[i].clone(),
                precision,
                recall,
                f1: f1_score(precision, recall),
                support: cm.support(i),
            }
        })
        .collect();

    let macro_avg = Averages {
        precision: order_free_mean(per_class.iter().map(|c| c.precision)),
        recall: order_free_mean(per_class.iter().map(|c| c.recall)),
        f1: order_free_mean(per_class.iter().map(|c| c.f1)),
    };
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        let mut terms: Vec<f64> = per_class
            .iter()
            .map(|c| f(c) * c.support as f64)
            .collect();
        terms.sort_by(f64::total_cmp);
        terms.iter().sum::<f64>() / total as f64
    };
    let weighted_avg = Averages {
        precision: weighted(|c| c.precision),
        recall: weighted(|c| c.recall),
        f1: weighted(|c| c.f1),
    };

    Ok(EvalReport {
        config: config.into(),
        display_name: display_name.into(),
        seeds,
        accuracy: ratio(cm.trace(), total),
        per_class,
        macro_avg,
        weighted_avg,
        confusion: cm.clone(),
    })
}

/// Averages every scalar metric across runs and sums the confusion matrices.
pub fn aggregate(reports: &[EvalReport]) -> Result<EvalReport, EvalError> {
    let first = reports.first().ok_or(EvalError::Empty)?;
    for r in &reports[1..] {
        if r.config != first.config {
            return Err(EvalError::Mismatch(format!(
                "configs `{}` and `{}` differ",
                first.config, r.config
            )));
        }
        if r.confusion.class_names != first.confusion.class_names {
            return Err(EvalError::Mismatch("class lists differ".into()));
        }
    }
    let c = first.confusion.n_classes();
    let mut counts = vec![vec![0u64; c]; c];
    for r in reports {
        for (row, src) in counts.iter_mut().zip(&r.confusion.counts) {
            for (a, b) in row.iter_mut().zip(src) {
                *a += b;
            }
        }
    }
    let confusion = ConfusionMatrix {
        class_names: first.confusion.class_names.clone(),
        counts,
    };
    let mean = |f: &dyn Fn(&EvalReport) -> f64| order_free_mean(reports.iter().map(f));
    let avg = |f: &dyn Fn(&EvalReport) -> Averages| Averages {
        precision: mean(&|r| f(r).precision),
        recall: mean(&|r| f(r).recall),
        f1: mean(&|r| f(r).f1),
    };
    let per_class = (0..c)
        .map(|i| ClassMetrics {
            name: confusion.class_names[i].clone(),
            precision: mean(&|r| r.per_class[i].precision),
            recall: mean(&|r| r.per_class[i].recall),
            f1: mean(&|r| r.per_class[i].f1),
            support: confusion.support(i),
        })
        .collect();

    Ok(EvalReport {
        config: first.config.clone(),
        display_name: first.display_name.clone(),
        seeds: reports.iter().flat_map(|r| r.seeds.iter().copied()).collect(),
        accuracy: mean(&|r| r.accuracy),
        per_class,
        macro_avg: avg(&|r| r.macro_avg),
        weighted_avg: avg(&|r| r.weighted_avg),
        confusion,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    #[default]
    Macro,
    Weighted,
}

impl std::str::FromStr for Averaging {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "macro" => Ok(Averaging::Macro),
            "weighted" => Ok(Averaging::Weighted),
            other => Err(format!("unknown averaging mode `{other}`")),
        }
    }
}

impl std::fmt::Display for Averaging {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Averaging::Macro => "macro",
            Averaging::Weighted => "weighted",
        })
    }
}

/// One row of the comparison table; metrics are fractions in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub averaging: Averaging,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ComparisonRow {
    pub fn from_report(report: &EvalReport, averaging: Averaging) -> Self {
        let avg = match averaging {
            Averaging::Macro => report.macro_avg,
            Averaging::Weighted => report.weighted_avg,
        };
        Self {
            model: report.display_name.clone(),
            averaging,
            accuracy: report.accuracy,
            precision: avg.precision,
            recall: avg.recall,
            f1: avg.f1,
        }
    }
}

const ROW_ORDER: [&str; 4] = ["MFCC + CNN", "MFCC + RNN", "Wavelet + CNN", "Wavelet + RNN"];
const HEADERS: [&str; 5] = [
    "Model",
    "Accuracy (%)",
    "Precision (%)",
    "Recall (%)",
    "F1-score (%)",
];

/// Rows for each report, with the four standard configurations first in
/// their usual order and anything else after, as given.
pub fn comparison_rows(reports: &[EvalReport], averaging: Averaging) -> Vec<ComparisonRow> {
    let mut rows: Vec<(usize, usize, ComparisonRow)> = reports
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let rank = ROW_ORDER
                .iter()
                .position(|name| *name == r.display_name)
                .unwrap_or(ROW_ORDER.len());
            (rank, i, ComparisonRow::from_report(r, averaging))
        })
        .collect();
    rows.sort_by_key(|(rank, i, _)| (*rank, *i));
    rows.into_iter().map(|(_, _, row)| row).collect()
}

/// Plain-text table: one row per model, metrics in percent with one decimal.
pub fn render_table(rows: &[ComparisonRow]) -> String {
    let model_width = rows
        .iter()
        .map(|r| r.model.len())
        .chain([HEADERS[0].len()])
        .max()
        .unwrap_or(5);
    let mut out = String::new();
    let _ = write!(out, "{:<model_width$}", HEADERS[0]);
    for h in &HEADERS[1..] {
        let _ = write!(out, "  {h}");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{:<model_width$}", r.model);
        for (h, v) in HEADERS[1..].iter().zip([r.accuracy, r.precision, r.recall, r.f1]) {
            let _ = write!(out, "  {:>width$.1}", v * 100.0, width = h.len());
        }
        out.push('\n');
    }
    if let Some(first) = rows.first() {
        let _ = writeln!(out, "Precision, recall and F1 are {} averages.", first.averaging);
    }
    out
}

pub fn render_comparison(reports: &[EvalReport], averaging: Averaging) -> (String, String) {
    let rows = comparison_rows(reports, averaging);
    let json = serde_json::to_string_pretty(&rows).expect("comparison rows serialise");
    (render_table(&rows), json)
}
