//! Grading rubric, success rate, cohort statistics and the sign test.

mod grade;
mod stats;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use grade::{grade, GradeEnv, GradeError, Rubric, RubricFile, DEFAULT_TOLERANCE};
pub use stats::{
    binomial_upper_tail_half, cohort_stats, sign_test, SignTestResult, Stats, StatsError,
    DEFAULT_ALPHA, TIE_EPSILON,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("grading columns must lie in [0, 1]")]
pub struct DomainError;

impl DomainError {
    pub fn key(&self) -> &'static str {
        "stats.domain"
    }
}

/// Requirement R1 score: mean of columns a and b.
pub fn r1(a: f64, b: f64) -> f64 {
    (a + b) / 2.0
}

/// Requirements R2 and R3 score: mean of columns c, d and e.
pub fn r23(c: f64, d: f64, e: f64) -> f64 {
    (c + d + e) / 3.0
}

/// Success rate `((a+b)/2 + 2*(c+d+e)/3) / 3`, unrounded.
pub fn sr(a: f64, b: f64, c: f64, d: f64, e: f64) -> Result<f64, DomainError> {
    if [a, b, c, d, e].iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(DomainError);
    }
    Ok((r1(a, b) + 2.0 * r23(c, d, e)) / 3.0)
}

/// Half-away-from-zero rounding to `decimals` places. The value is first
/// snapped to 9 decimals so that binary noise (0.915 stored as
/// 0.91499999…) does not flip the half case.
pub fn round_half_away(x: f64, decimals: u32) -> f64 {
    assert!(decimals <= 9);
    let snapped = (x * 1e9).round() as i128;
    let unit = 10i128.pow(9 - decimals);
    let q = (snapped.abs() + unit / 2) / unit * snapped.signum();
    q as f64 / 10f64.powi(decimals as i32)
}

pub fn round2(x: f64) -> f64 {
    round_half_away(x, 2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradeReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub r1: f64,
    pub r23: f64,
    pub sr: f64,
}

impl GradeReport {
    pub fn from_cells(a: f64, b: f64, c: f64, d: f64, e: f64) -> Result<Self, DomainError> {
        let sr = sr(a, b, c, d, e)?;
        Ok(GradeReport { label: None, a, b, c, d, e, r1: r1(a, b), r23: r23(c, d, e), sr })
    }

    pub fn labeled(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    /// Whether r1, r23 and sr agree with a to e.
    pub fn is_consistent(&self) -> bool {
        let close = |x: f64, y: f64| (x - y).abs() < 1e-12;
        close(self.r1, r1(self.a, self.b))
            && close(self.r23, r23(self.c, self.d, self.e))
            && close(self.sr, (self.r1 + 2.0 * self.r23) / 3.0)
    }

    /// The same report with every figure rounded for display.
    pub fn rounded(&self) -> GradeReport {
        GradeReport {
            label: self.label.clone(),
            a: round2(self.a),
            b: round2(self.b),
            c: round2(self.c),
            d: round2(self.d),
            e: round2(self.e),
            r1: round2(self.r1),
            r23: round2(self.r23),
            sr: round2(self.sr),
        }
    }
}

fn fmt_cell(v: f64) -> String {
    let s = format!("{:.2}", round2(v));
    match s.strip_prefix("0.") {
        Some(rest) => format!(".{rest}"),
        None if s == "1.00" => "1".to_string(),
        None => s,
    }
}

/// Aligned text table with one row per report and a closing row of column
/// means, printed like the published grading table.
pub fn render_table(reports: &[GradeReport]) -> String {
    let header = ["P", "a", "b", "c", "d", "e", "R1%", "R2&3%", "SR"];
    let mut rows: Vec<Vec<String>> = Vec::new();
    for (i, r) in reports.iter().enumerate() {
        let label = r.label.clone().unwrap_or_else(|| (i + 1).to_string());
        let mut row = vec![label];
        row.extend([r.a, r.b, r.c, r.d, r.e, r.r1, r.r23].map(fmt_cell));
        row.push(format!("{:.2}", round2(r.sr)));
        rows.push(row);
    }
    if !reports.is_empty() {
        let n = reports.len() as f64;
        let mean = |f: fn(&GradeReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        let mut row = vec!["Mean".to_string(), String::new(), String::new(), String::new(), String::new(), String::new()];
        row.push(format!("{:.2}", round2(mean(|r| r.r1))));
        row.push(format!("{:.2}", round2(mean(|r| r.r23))));
        row.push(format!("{:.2}", round2(mean(|r| r.sr))));
        rows.push(row);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(header.to_vec()) + "\n";
    for r in &rows {
        out += &line(r.iter().map(String::as_str).collect());
        out.push('\n');
    }
    out
}
