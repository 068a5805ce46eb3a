use std::fmt::Write as _;

use serde::Serialize;

/// One measurement. `bound`/`passed` are absent for rows that only report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub experiment: String,
    pub hbar: f64,
    #[serde(rename = "R")]
    pub r: usize,
    pub window: usize,
    pub value_lower: f64,
    pub value_upper: f64,
    pub bound: Option<f64>,
    pub slack: f64,
    pub passed: Option<bool>,
}

impl ReportRow {
    pub fn new(experiment: impl Into<String>, hbar: f64, r: usize, window: usize, lower: f64, upper: f64) -> Self {
        ReportRow {
            experiment: experiment.into(),
            hbar,
            r,
            window,
            value_lower: lower,
            value_upper: upper,
            bound: None,
            slack: (upper - lower).max(0.0),
            passed: None,
        }
    }

    /// Attaches a bound, passing when the lower value does not exceed it.
    pub fn with_bound(mut self, bound: f64) -> Self {
        self.bound = Some(bound);
        self.passed = Some(self.value_lower <= bound);
        self
    }
}

pub const CSV_HEADER: &str = "experiment,hbar,R,window,value_lower,value_upper,bound,slack,passed";

pub fn to_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        let _ = writeln!(
            out,
            "{},{:.16e},{},{},{:.16e},{:.16e},{},{:.16e},{}",
            row.experiment,
            row.hbar,
            row.r,
            row.window,
            row.value_lower,
            row.value_upper,
            row.bound.map(|b| format!("{b:.16e}")).unwrap_or_default(),
            row.slack,
            row.passed.map(|p| p.to_string()).unwrap_or_default(),
        );
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub experiment: String,
    pub verdict: String,
    pub worst_row: Option<ReportRow>,
}

pub fn all_passed(rows: &[ReportRow]) -> bool {
    rows.iter().all(|r| r.passed != Some(false))
}

/// Verdict plus the row that came closest to (or went furthest past) its
/// bound; rows without bounds are only considered when none has one.
pub fn summarize(experiment: &str, rows: &[ReportRow]) -> Summary {
    let margin = |r: &ReportRow| r.bound.map(|b| r.value_lower - b);
    let worst = if let Some(failed) = rows.iter().find(|r| r.passed == Some(false)) {
        Some(failed.clone())
    } else if rows.iter().any(|r| r.bound.is_some()) {
        rows.iter()
            .filter(|r| r.bound.is_some())
            .max_by(|a, b| margin(a).unwrap().total_cmp(&margin(b).unwrap()))
            .cloned()
    } else {
        rows.iter().max_by(|a, b| a.value_lower.total_cmp(&b.value_lower)).cloned()
    };
    Summary {
        experiment: experiment.to_string(),
        verdict: if all_passed(rows) { "pass" } else { "fail" }.to_string(),
        worst_row: worst,
    }
}
