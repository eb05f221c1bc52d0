use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::report::{paired_comparison, regression, Indicator, StatLine, TestKind};
use crate::error::{Error, Result};
use crate::network::{ELECTRODE_CODES, LENGTH_GRID_S, WIDTH_CODES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sweep {
    /// The plan's variant list; the first one is the reference.
    Variants,
    AngleLength,
    EmgLength,
    Width,
    Electrodes,
    /// Per-joint networks against single and widened single networks.
    Monolithic,
}

impl Sweep {
    pub const ALL: [Sweep; 6] =
        [Sweep::Variants, Sweep::AngleLength, Sweep::EmgLength, Sweep::Width, Sweep::Electrodes, Sweep::Monolithic];

    pub fn name(self) -> &'static str {
        match self {
            Sweep::Variants => "variants",
            Sweep::AngleLength => "angle-length",
            Sweep::EmgLength => "emg-length",
            Sweep::Width => "width",
            Sweep::Electrodes => "electrodes",
            Sweep::Monolithic => "monolithic",
        }
    }
}

impl fmt::Display for Sweep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Sweep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Sweep::ALL
            .into_iter()
            .find(|w| w.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown sweep {s:?}; expected one of variants, angle-length, emg-length, width, electrodes, monolithic")))
    }
}

/// Whether a condition carries the angle branch; pairs of conditions with
/// the same label and opposite arms are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Full,
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub label: String,
    pub code: String,
    pub arm: Arm,
    /// Numeric condition value for regressions (input length in seconds).
    pub x: Option<f64>,
}

fn cond(label: impl Into<String>, code: impl Into<String>, arm: Arm, x: Option<f64>) -> Condition {
    Condition { label: label.into(), code: code.into(), arm, x }
}

/// Expands a sweep into the variant codes it trains.
pub fn conditions(sweep: Sweep, plan_variants: &[String]) -> Vec<Condition> {
    match sweep {
        Sweep::Variants => plan_variants
            .iter()
            .map(|c| {
                let arm = if c.parse::<crate::network::Variant>().is_ok_and(|v| !v.angle_branch) { Arm::B } else { Arm::Full };
                cond(c.clone(), c.clone(), arm, None)
            })
            .collect(),
        Sweep::AngleLength => {
            LENGTH_GRID_S.iter().map(|&l| cond(format!("{l}"), format!("angle-{l}"), Arm::Full, Some(l))).collect()
        }
        Sweep::EmgLength => LENGTH_GRID_S
            .iter()
            .flat_map(|&l| {
                [
                    cond(format!("{l}"), format!("emg-{l}"), Arm::Full, Some(l)),
                    cond(format!("{l}"), format!("B+emg-{l}"), Arm::B, Some(l)),
                ]
            })
            .collect(),
        Sweep::Width => {
            let mut out = vec![cond("original", "full", Arm::Full, None), cond("original", "B", Arm::B, None)];
            for k in 1..=WIDTH_CODES.len() {
                out.push(cond(format!("E-{k}"), format!("E-{k}"), Arm::Full, None));
                out.push(cond(format!("E-{k}"), format!("B+E-{k}"), Arm::B, None));
            }
            out
        }
        Sweep::Electrodes => std::iter::once(cond("original", "full", Arm::Full, None))
            .chain(ELECTRODE_CODES.iter().map(|c| cond(*c, *c, Arm::Full, None)))
            .collect(),
        Sweep::Monolithic => vec![
            cond("RPC-Net", "full", Arm::Full, None),
            cond("RPC-Net-I", "I", Arm::Full, None),
            cond("RPC-Net-W", "W", Arm::Full, None),
            cond("RPC-Net", "B", Arm::B, None),
            cond("RPC-Net-I", "I-B", Arm::B, None),
            cond("RPC-Net-W", "W-B", Arm::B, None),
        ],
    }
}

/// Scores of one trained condition for one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub subject: String,
    pub condition: Condition,
    pub md: f64,
    pub mpcc: f64,
    pub umd: f64,
    pub multiply_count: usize,
}

fn values(rows: &[AblationRow], subjects: &[String], pick: impl Fn(&Condition) -> bool, ind: Indicator) -> Vec<f64> {
    let mut out = Vec::new();
    for s in subjects {
        for r in rows.iter().filter(|r| &r.subject == s && pick(&r.condition)) {
            out.push(match ind {
                Indicator::Md => r.md,
                Indicator::Mpcc => r.mpcc,
            });
        }
    }
    out
}

/// Paired values of the full and B arms over every subject and label.
fn arm_pairs(rows: &[AblationRow], subjects: &[String], labels: &[String], ind: Indicator) -> (Vec<f64>, Vec<f64>) {
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for s in subjects {
        for l in labels {
            let get = |arm| values(rows, std::slice::from_ref(s), |c| &c.label == l && c.arm == arm, ind);
            if let ([x], [y]) = (get(Arm::Full).as_slice(), get(Arm::B).as_slice()) {
                a.push(*x);
                b.push(*y);
            }
        }
    }
    (a, b)
}

fn unique(items: impl Iterator<Item = String>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for i in items {
        if !out.contains(&i) {
            out.push(i);
        }
    }
    out
}

/// The statistics that accompany each sweep.
pub fn sweep_statistics(sweep: Sweep, rows: &[AblationRow], plan_variants: &[String]) -> Vec<StatLine> {
    let subjects = unique(rows.iter().map(|r| r.subject.clone()));
    let labels = unique(conditions(sweep, plan_variants).into_iter().map(|c| c.label));
    let by_code = |code: &str, ind| values(rows, &subjects, |c| c.code == code, ind);
    let mut out = Vec::new();
    let indicators = [Indicator::Md, Indicator::Mpcc];
    match sweep {
        Sweep::Variants => {
            if let Some((reference, others)) = plan_variants.split_first() {
                for other in others {
                    for ind in indicators {
                        out.push(paired_comparison(
                            TestKind::PairedT,
                            ind,
                            (reference, &by_code(reference, ind)),
                            (other, &by_code(other, ind)),
                        ));
                    }
                }
            }
        }
        Sweep::AngleLength | Sweep::EmgLength => {
            let what = if sweep == Sweep::AngleLength { "angle input length" } else { "EMG input length" };
            for arm in [Arm::Full, Arm::B] {
                let picked: Vec<&AblationRow> = rows.iter().filter(|r| r.condition.arm == arm).collect();
                if picked.is_empty() {
                    continue;
                }
                let x: Vec<f64> = picked.iter().map(|r| r.condition.x.unwrap_or(f64::NAN)).collect();
                let name = if arm == Arm::Full { "RPC-Net" } else { "RPC-Net-B" };
                for ind in indicators {
                    let y: Vec<f64> = picked.iter().map(|r| if ind == Indicator::Md { r.md } else { r.mpcc }).collect();
                    out.push(regression(ind, &format!("{what} ({name})"), &x, &y));
                }
            }
            if sweep == Sweep::EmgLength {
                for ind in indicators {
                    let (a, b) = arm_pairs(rows, &subjects, &labels, ind);
                    out.push(paired_comparison(TestKind::Wilcoxon, ind, ("RPC-Net", &a), ("RPC-Net-B", &b)));
                }
            }
        }
        Sweep::Width => {
            for ind in indicators {
                let (a, b) = arm_pairs(rows, &subjects, &labels, ind);
                out.push(paired_comparison(TestKind::Wilcoxon, ind, ("RPC-Net", &a), ("RPC-Net-B", &b)));
            }
        }
        Sweep::Electrodes => {}
        Sweep::Monolithic => {
            for (reference, others) in [("full", ["I", "W"]), ("B", ["I-B", "W-B"])] {
                let name = |c: &str| if c == "full" { "RPC-Net".to_string() } else { format!("RPC-Net-{c}") };
                for other in others {
                    for ind in indicators {
                        out.push(paired_comparison(
                            TestKind::PairedT,
                            ind,
                            (&name(reference), &by_code(reference, ind)),
                            (&name(other), &by_code(other, ind)),
                        ));
                    }
                }
            }
            for kind in [TestKind::Sign, TestKind::Wilcoxon] {
                for ind in indicators {
                    let (a, b) = arm_pairs(rows, &subjects, &labels, ind);
                    out.push(paired_comparison(kind, ind, ("RPC-Net", &a), ("RPC-Net-B", &b)));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_sizes() {
        let per_arm = |s: Sweep| conditions(s, &[]).iter().filter(|c| c.arm == Arm::Full).count();
        assert_eq!(per_arm(Sweep::EmgLength), 8);
        assert_eq!(per_arm(Sweep::AngleLength), 8);
        assert_eq!(conditions(Sweep::Electrodes, &[]).len(), 19);
        assert_eq!(conditions(Sweep::Width, &[]).len(), 12);
        assert_eq!(conditions(Sweep::Monolithic, &[]).len(), 6);
        for s in Sweep::ALL {
            for c in conditions(s, &["full".into(), "B".into()]) {
                c.code.parse::<crate::network::Variant>().unwrap();
            }
            assert_eq!(s.name().parse::<Sweep>().unwrap(), s);
        }
    }

    #[test]
    fn width_sweep_pairs_arms_per_subject() {
        let mut rows = Vec::new();
        for (i, s) in ["S0", "S1"].iter().enumerate() {
            for c in conditions(Sweep::Width, &[]) {
                let penalty = if c.arm == Arm::B { 5.0 } else { 0.0 };
                rows.push(AblationRow {
                    subject: s.to_string(),
                    md: 20.0 + i as f64 + penalty + c.label.len() as f64,
                    mpcc: 0.8 - penalty / 100.0 + i as f64 / 100.0,
                    umd: 0.0,
                    multiply_count: 0,
                    condition: c,
                });
            }
        }
        let stats = sweep_statistics(Sweep::Width, &rows, &[]);
        assert_eq!(stats.len(), 2);
        assert!(stats.iter().all(|s| s.n == 12 && s.p.unwrap() < 0.01));
        assert_eq!(stats[0].statistic, Some(0.0));
    }
}
