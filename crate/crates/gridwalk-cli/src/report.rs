//! The JSON run report: canonical key order, shortest round-trip decimals,
//! byte-stable across identical runs (wall time is opt-in for that reason).

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

/// Per-row accounting in a [`RunReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowReport {
    /// Realized deviation `Σⱼ aᵢⱼ(pⱼ − qⱼ)`.
    pub deviation: f64,
    /// Budget `Δᵢ`.
    pub delta: f64,
    /// Certified failure bound for the row (capped at 1).
    pub prob_bad: f64,
    /// Whether the row's conditions failed.
    pub bad: bool,
}

/// The report emitted next to every rounded vector.
///
/// Field order is the canonical JSON key order; two identical runs emit
/// byte-identical reports unless `wall_time_seconds` is requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Subcommand that produced the report.
    pub command: String,
    /// Bound/rounding mode (`partial`, `integral`, `hoeffding`, `chernoff`,
    /// `bernstein`, or a baseline algorithm name).
    pub mode: String,
    /// Caller-requested grid granularity.
    pub k: u32,
    /// Granularity actually walked after any inflation.
    pub k_effective: u32,
    /// Constant profile name.
    pub profile: String,
    /// Number of rows (constraints/sets).
    pub rows_total: usize,
    /// Per-row deviations, budgets, bounds, and bad flags.
    pub rows: Vec<RowReport>,
    /// Indices of bad rows, ascending.
    pub bad_rows: Vec<u32>,
    /// `|I^bad|`.
    pub bad_count: usize,
    /// Sum of per-row failure bounds (each capped at 1).
    pub prob_bad_sum: f64,
    /// Work proxy: total objective complexity over all derandomization calls.
    pub work: u64,
    /// Total walk steps run.
    pub steps: u64,
    /// Wall time, present only when timing was requested.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_time_seconds: Option<f64>,
    /// Command-specific details (windows, labels, ladder levels, …).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub details: Option<serde_json::Value>,
}

impl RunReport {
    /// Recompute the aggregate fields from `rows` (bad list, count, bound sum).
    pub fn finalize(mut self) -> Self {
        self.rows_total = self.rows.len();
        self.bad_rows = self
            .rows
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.bad.then_some(i as u32))
            .collect();
        self.bad_count = self.bad_rows.len();
        self.prob_bad_sum = self.rows.iter().map(|r| r.prob_bad.min(1.0)).sum();
        self
    }
}

/// Serialize with stable formatting (pretty, canonical key order).
pub fn render_report(report: &RunReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serialization cannot fail");
    s.push('\n');
    s
}

/// Write the report to `destination`.
pub fn write_report(report: &RunReport, destination: &Path) -> Result<()> {
    fs::write(destination, render_report(report))
        .with_context(|| format!("cannot write report to {}", destination.display()))
}

/// Load a report back (for `verify`).
pub fn read_report(path: &Path) -> Result<RunReport> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read report from {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("malformed report {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunReport {
        RunReport {
            command: "fix".into(),
            mode: "chernoff".into(),
            k: 8,
            k_effective: 8,
            profile: "practical".into(),
            rows_total: 0,
            rows: vec![
                RowReport {
                    deviation: 0.25,
                    delta: 1.0,
                    prob_bad: 0.5,
                    bad: false,
                },
                RowReport {
                    deviation: -3.0,
                    delta: 1.0,
                    prob_bad: 2.0,
                    bad: true,
                },
            ],
            bad_rows: vec![],
            bad_count: 0,
            prob_bad_sum: 0.0,
            work: 10,
            steps: 4,
            wall_time_seconds: None,
            details: None,
        }
        .finalize()
    }

    #[test]
    fn finalize_aggregates() {
        let r = sample();
        assert_eq!(r.rows_total, 2);
        assert_eq!(r.bad_rows, vec![1]);
        assert_eq!(r.bad_count, 1);
        assert!((r.prob_bad_sum - 1.5).abs() < 1e-15); // second row capped at 1
    }

    #[test]
    fn rendering_is_stable_and_round_trips() {
        let r = sample();
        let a = render_report(&r);
        let b = render_report(&r);
        assert_eq!(a, b);
        let back: RunReport = serde_json::from_str(&a).unwrap();
        assert_eq!(back, r);
        // Canonical key order: command first, mode second.
        let cmd = a.find("\"command\"").unwrap();
        let mode = a.find("\"mode\"").unwrap();
        let k = a.find("\"k\"").unwrap();
        assert!(cmd < mode && mode < k);
        // No wall time unless requested.
        assert!(!a.contains("wall_time_seconds"));
    }
}
