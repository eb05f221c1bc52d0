use serde::{Deserialize, Serialize};

use super::TrialScores;

/// One line of the per-subject results table. Distances in mm,
/// correlations in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    #[serde(rename = "Subject")]
    pub subject: String,
    #[serde(rename = "MD")]
    pub md: f64,
    #[serde(rename = "MD_T1")]
    pub md_t1: f64,
    #[serde(rename = "MD_T2")]
    pub md_t2: f64,
    #[serde(rename = "MD_Med")]
    pub md_med: f64,
    #[serde(rename = "MPCC")]
    pub mpcc: f64,
    #[serde(rename = "MPCC_T1")]
    pub mpcc_t1: f64,
    #[serde(rename = "MPCC_T2")]
    pub mpcc_t2: f64,
    #[serde(rename = "MPCC_Med")]
    pub mpcc_med: f64,
}

impl TableRow {
    pub fn new(subject: impl Into<String>, s: &TrialScores) -> Self {
        Self {
            subject: subject.into(),
            md: s.md.mean,
            md_t1: s.md.t1,
            md_t2: s.md.t2,
            md_med: s.md.median,
            mpcc: 100.0 * s.mpcc.mean,
            mpcc_t1: 100.0 * s.mpcc.t1,
            mpcc_t2: 100.0 * s.mpcc.t2,
            mpcc_med: 100.0 * s.mpcc.median,
        }
    }
}

const HEADER: &str = "Subject,MD,MD_T1,MD_T2,MD_Med,MPCC,MPCC_T1,MPCC_T2,MPCC_Med";

/// Rows as CSV with a fixed six-decimal format, so identical scores give
/// identical bytes.
pub fn table_csv(rows: &[TableRow]) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            r.subject, r.md, r.md_t1, r.md_t2, r.md_med, r.mpcc, r.mpcc_t1, r.mpcc_t2, r.mpcc_med
        ));
    }
    out
}

pub fn table_json(rows: &[TableRow]) -> String {
    serde_json::to_string_pretty(rows).expect("table rows serialise")
}
