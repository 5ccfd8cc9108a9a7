//! Benchmark report shapes and their JSON/CSV renderings.
//!
//! Reports carry no timestamps or latencies: with a deterministic backend,
//! re-running a command must reproduce every output byte.

use std::collections::BTreeMap;

use gavel_core::preference::AccuracyReport;
use gavel_core::{Choice, Slice};
use serde::{Deserialize, Serialize};

/// Accuracy tally with the derived fraction, for readable reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportTally {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

impl ReportTally {
    fn from_counts(correct: usize, total: usize) -> Self {
        ReportTally {
            correct,
            total,
            accuracy: if total == 0 {
                0.0
            } else {
                correct as f64 / total as f64
            },
        }
    }
}

/// Per-slice benchmark accuracy plus the flag rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceReport {
    pub overall: ReportTally,
    pub slices: BTreeMap<Slice, ReportTally>,
    /// Records whose final outcome was a terminal flag (no usable verdict).
    pub flagged: usize,
    pub flag_rate: f64,
}

impl SliceReport {
    pub fn from_accuracy(accuracy: &AccuracyReport, flagged: usize) -> Self {
        let overall = ReportTally::from_counts(accuracy.overall.correct, accuracy.overall.total);
        let slices = accuracy
            .per_slice
            .iter()
            .map(|(slice, tally)| (*slice, ReportTally::from_counts(tally.correct, tally.total)))
            .collect();
        SliceReport {
            overall,
            slices,
            flagged,
            flag_rate: if accuracy.overall.total == 0 {
                0.0
            } else {
                flagged as f64 / accuracy.overall.total as f64
            },
        }
    }

    /// Overall accuracy must equal the record-count-weighted mean of slice
    /// accuracies whenever every record carries a slice tag.
    pub fn is_consistent(&self) -> bool {
        let slice_total: usize = self.slices.values().map(|t| t.total).sum();
        if slice_total != self.overall.total {
            // untagged records exist; the weighted-mean identity does not apply
            return true;
        }
        let weighted: f64 = self
            .slices
            .values()
            .map(|t| t.accuracy * t.total as f64)
            .sum();
        let expected = if self.overall.total == 0 {
            0.0
        } else {
            weighted / self.overall.total as f64
        };
        (expected - self.overall.accuracy).abs() < 1e-12
    }
}

/// Per-record outcome kept for traces and checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordOutcome {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slice: Option<Slice>,
    pub gold: Choice,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted: Option<Choice>,
    pub flagged: bool,
    pub attempts: u32,
}

fn pct(fraction: f64) -> String {
    format!("{:.1}", fraction * 100.0)
}

/// Header of the benchmark-table CSV.
pub const CSV_HEADER: &str =
    "Variant,Overall (%),Chat (%),Chat-Hard (%),Safety (%),Reasoning (%),Flag rate (%)";

/// One CSV row for a report, `-` for slices the dataset never touched.
pub fn csv_row(variant: &str, report: &SliceReport) -> String {
    let mut cells = vec![variant.to_string(), pct(report.overall.accuracy)];
    for slice in Slice::ALL {
        cells.push(
            report
                .slices
                .get(&slice)
                .map(|t| pct(t.accuracy))
                .unwrap_or_else(|| "-".to_string()),
        );
    }
    cells.push(pct(report.flag_rate));
    cells.join(",")
}

/// Render a single-report CSV (header plus one row).
pub fn report_csv(variant: &str, report: &SliceReport) -> String {
    format!("{CSV_HEADER}\n{}\n", csv_row(variant, report))
}
