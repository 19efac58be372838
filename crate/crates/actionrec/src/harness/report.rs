//! Per-class evaluation outcomes and their rendering as TSV or JSON
//! text.

use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::util;

/// Confusion counts of one one-vs-rest model over the test split.
/// "Positive" means the image belongs to the model's class.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClassOutcome {
    pub class: String,
    pub true_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
    pub false_positives: usize,
}

impl ClassOutcome {
    pub fn new(class: impl Into<String>) -> Self {
        ClassOutcome { class: class.into(), ..ClassOutcome::default() }
    }

    /// Tallies one test image given its ground truth and prediction.
    pub fn observe(&mut self, is_positive: bool, predicted_positive: bool) {
        match (is_positive, predicted_positive) {
            (true, true) => self.true_positives += 1,
            (true, false) => self.false_negatives += 1,
            (false, false) => self.true_negatives += 1,
            (false, true) => self.false_positives += 1,
        }
    }

    pub fn positive_support(&self) -> usize {
        self.true_positives + self.false_negatives
    }

    pub fn negative_support(&self) -> usize {
        self.true_negatives + self.false_positives
    }

    /// TP / (TP + FN); absent when no positive test images exist.
    pub fn positive_accuracy(&self) -> Option<f64> {
        let support = self.positive_support();
        (support > 0).then(|| self.true_positives as f64 / support as f64)
    }

    /// TN / (TN + FP); absent when no negative test images exist.
    pub fn negative_accuracy(&self) -> Option<f64> {
        let support = self.negative_support();
        (support > 0).then(|| self.true_negatives as f64 / support as f64)
    }
}

/// One row per evaluated class, in evaluation order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EvalReport {
    pub rows: Vec<ClassOutcome>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Tsv,
    Json,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    }
}

impl EvalReport {
    /// Mean of the defined per-class positive accuracies.
    pub fn mean_positive_accuracy(&self) -> Option<f64> {
        mean(self.rows.iter().map(ClassOutcome::positive_accuracy))
    }

    /// Mean of the defined per-class negative accuracies.
    pub fn mean_negative_accuracy(&self) -> Option<f64> {
        mean(self.rows.iter().map(ClassOutcome::negative_accuracy))
    }
}

fn fmt_acc(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.4}"),
        None => "-".to_string(),
    }
}

#[derive(Serialize)]
struct JsonRow<'a> {
    class: &'a str,
    positive_accuracy: Option<f64>,
    negative_accuracy: Option<f64>,
    positive_support: usize,
    negative_support: usize,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    schema_version: u32,
    rows: Vec<JsonRow<'a>>,
    mean_positive_accuracy: Option<f64>,
    mean_negative_accuracy: Option<f64>,
}

/// Renders the report. Column order is fixed: class, positive
/// accuracy, negative accuracy, positive support, negative support.
/// The TSV MEAN row carries mean accuracies and summed supports;
/// undefined accuracies render as "-".
pub fn render_report(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Tsv => {
            let mut out = String::from(
                "class\tpositive_accuracy\tnegative_accuracy\tpositive_support\tnegative_support\n",
            );
            for row in &report.rows {
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\n",
                    row.class,
                    fmt_acc(row.positive_accuracy()),
                    fmt_acc(row.negative_accuracy()),
                    row.positive_support(),
                    row.negative_support()
                ));
            }
            let pos_total: usize = report.rows.iter().map(ClassOutcome::positive_support).sum();
            let neg_total: usize = report.rows.iter().map(ClassOutcome::negative_support).sum();
            out.push_str(&format!(
                "MEAN\t{}\t{}\t{}\t{}\n",
                fmt_acc(report.mean_positive_accuracy()),
                fmt_acc(report.mean_negative_accuracy()),
                pos_total,
                neg_total
            ));
            out
        }
        ReportFormat::Json => {
            let view = JsonReport {
                schema_version: 1,
                rows: report
                    .rows
                    .iter()
                    .map(|row| JsonRow {
                        class: &row.class,
                        positive_accuracy: row.positive_accuracy(),
                        negative_accuracy: row.negative_accuracy(),
                        positive_support: row.positive_support(),
                        negative_support: row.negative_support(),
                    })
                    .collect(),
                mean_positive_accuracy: report.mean_positive_accuracy(),
                mean_negative_accuracy: report.mean_negative_accuracy(),
            };
            let mut text = serde_json::to_string_pretty(&view).expect("report serializes");
            text.push('\n');
            text
        }
    }
}

/// Writes the rendered report atomically.
pub fn report_emit(report: &EvalReport, format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    util::write_atomic(path.as_ref(), render_report(report, format).as_bytes())
}
