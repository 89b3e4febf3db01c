//! Human and machine-readable renderings of cross-validation results.

use serde::Serialize;

use crate::harness::CvResult;

pub const TOOL_NAME: &str = "densclf";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Percent with two decimals, e.g. `0.71864 -> "71.86%"`.
pub fn percent(fraction: f64) -> String {
    format!("{:.2}%", 100.0 * fraction)
}

/// `Model | Average Accuracy | Average F1-Score` rows; failed runs show `FAILED`.
pub fn results_table(results: &[CvResult]) -> String {
    let mut rows = vec![[
        "Model".to_string(),
        "Average Accuracy".to_string(),
        "Average F1-Score".to_string(),
    ]];
    for r in results {
        match &r.summary {
            Some(s) => rows.push([r.model.clone(), percent(s.mean_accuracy), percent(s.mean_f1)]),
            None => rows.push([r.model.clone(), "FAILED".into(), "FAILED".into()]),
        }
    }
    let widths: Vec<usize> = (0..3).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        out.push_str(cells.join(" | ").trim_end());
        out.push('\n');
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            out.push_str(&rule.join("-|-"));
            out.push('\n');
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct DatasetInfo {
    pub source: String,
    pub rows: usize,
    pub features: usize,
    pub classes: Vec<String>,
    pub class_counts: Vec<usize>,
    pub positive_class: String,
}

/// Machine-readable run record. Contains nothing time-dependent, so equal
/// inputs render to identical bytes.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config: &'a C,
    pub dataset: DatasetInfo,
    pub results: &'a [CvResult],
}

impl<C: Serialize> RunReport<'_, C> {
    pub fn to_json(&self) -> crate::Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}
