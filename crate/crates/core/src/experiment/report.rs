use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metrics::{
    linreg_slope_test, paired_t_one_sided, sign_test_one_sided, wilcoxon_signed_rank_one_sided, Alternative, Regression,
    TestOutcome,
};

/// Which indicator a statistic is about, and hence which direction favours
/// the first sample: smaller is better for MD, larger for MPCC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Indicator {
    #[serde(rename = "MD")]
    Md,
    #[serde(rename = "MPCC")]
    Mpcc,
}

impl Indicator {
    pub fn name(self) -> &'static str {
        match self {
            Indicator::Md => "MD",
            Indicator::Mpcc => "MPCC",
        }
    }

    /// Alternative hypothesis "the first sample is better".
    pub fn better(self) -> Alternative {
        match self {
            Indicator::Md => Alternative::Less,
            Indicator::Mpcc => Alternative::Greater,
        }
    }

    /// Relation stated by the null hypothesis "the first is not better".
    fn null_relation(self) -> &'static str {
        match self {
            Indicator::Md => ">=",
            Indicator::Mpcc => "<=",
        }
    }

    fn slope_unit(self) -> &'static str {
        match self {
            Indicator::Md => "mm/s",
            Indicator::Mpcc => "1/s",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    PairedT,
    Wilcoxon,
    Sign,
    Regression,
}

/// One reported statistic with its caption-style rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatLine {
    pub kind: TestKind,
    pub indicator: Indicator,
    /// Compared groups or the regressor, for humans.
    pub subject: String,
    pub n: usize,
    pub statistic: Option<f64>,
    pub p: Option<f64>,
    pub regression: Option<Regression>,
    /// Set when the test could not be computed (for example no variance).
    pub error: Option<String>,
    pub text: String,
}

fn sci(v: f64) -> String {
    format!("{v:.1e}")
}

/// One-sided paired comparison "a better than b" in the indicator's sense.
pub fn paired_comparison(kind: TestKind, indicator: Indicator, a: (&str, &[f64]), b: (&str, &[f64])) -> StatLine {
    let outcome: Result<TestOutcome> = match kind {
        TestKind::PairedT => paired_t_one_sided(a.1, b.1, indicator.better()),
        TestKind::Wilcoxon => wilcoxon_signed_rank_one_sided(a.1, b.1, indicator.better()),
        TestKind::Sign => sign_test_one_sided(a.1, b.1, indicator.better()),
        TestKind::Regression => unreachable!("regressions go through `regression`"),
    };
    let rel = indicator.null_relation();
    let (name, hypothesis) = match kind {
        TestKind::PairedT => ("one-sided paired t-test", format!("{} {rel} {}", a.0, b.0)),
        TestKind::Wilcoxon => ("Wilcoxon signed-rank test", format!("median {} {rel} median {}", a.0, b.0)),
        _ => ("Sign test", format!("median {} {rel} median {}", a.0, b.0)),
    };
    let head = format!("{name} results for {} (H0: {hypothesis})", indicator.name());
    match outcome {
        Ok(o) => {
            let stat = match kind {
                TestKind::PairedT => format!("t({})={:.3}", o.n, o.statistic),
                _ => format!("W={}", o.statistic),
            };
            StatLine {
                kind,
                indicator,
                subject: format!("{} vs {}", a.0, b.0),
                n: o.n,
                statistic: Some(o.statistic),
                p: Some(o.p),
                regression: None,
                error: None,
                text: format!("{head}: {stat} p={}", sci(o.p)),
            }
        }
        Err(e) => StatLine {
            kind,
            indicator,
            subject: format!("{} vs {}", a.0, b.0),
            n: a.1.len(),
            statistic: None,
            p: None,
            regression: None,
            error: Some(e.to_string()),
            text: format!("{head}: not computed ({e})"),
        },
    }
}

/// OLS of the indicator on a condition value (input length in seconds).
pub fn regression(indicator: Indicator, label: &str, x: &[f64], y: &[f64]) -> StatLine {
    let head = format!("Regression analysis results for {} on {label} (H0: beta1=0)", indicator.name());
    match linreg_slope_test(x, y) {
        Ok(r) => StatLine {
            kind: TestKind::Regression,
            indicator,
            subject: label.into(),
            n: r.n,
            statistic: Some(r.t),
            p: Some(r.p),
            text: format!(
                "{head}: beta1={:.3} {}, SE={}, t={}, p={}, R2={}, adjusted R2={}",
                r.slope,
                indicator.slope_unit(),
                sci(r.slope_se),
                sci(r.t),
                sci(r.p),
                sci(r.r_squared),
                sci(r.adjusted_r_squared)
            ),
            regression: Some(r),
            error: None,
        },
        Err(e) => StatLine {
            kind: TestKind::Regression,
            indicator,
            subject: label.into(),
            n: x.len(),
            statistic: None,
            p: None,
            regression: None,
            error: Some(e.to_string()),
            text: format!("{head}: not computed ({e})"),
        },
    }
}
