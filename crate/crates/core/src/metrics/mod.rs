//! Performance indicators and the statistics used to compare variants.

mod stats;
mod table;
mod timing;

pub use stats::{
    average_ranks, linreg_slope_test, paired_t_one_sided, sign_test_one_sided, wilcoxon_signed_rank_one_sided,
    Alternative, Regression, TestOutcome, WILCOXON_EXACT_MAX_N,
};
pub use table::{table_csv, table_json, TableRow};
pub use timing::{measure_inference_time, InferenceTimeReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{Finger, HandPose3D, NUM_HAND_MARKERS};
use crate::signal::Frames;

/// Pearson product-moment correlation.
pub fn pcc(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Contract(format!("series of lengths {} and {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::UndefinedCorrelation(format!("{} samples", a.len())));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation("a series has zero variance".into()));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Tip markers entering the weighted fingertip distance.
pub const WFD_TIPS: [usize; 3] = [Finger::Index.tip_marker(), Finger::Middle.tip_marker(), Finger::Thumb.tip_marker()];

/// Weighted fingertip distance (mm): mean tip-to-tip distance over the
/// index, middle and thumb tips.
pub fn wfd(actual: &HandPose3D, estimated: &HandPose3D) -> Result<f64> {
    let mut sum = 0.0;
    for &m in &WFD_TIPS {
        if !(actual.valid[m] && estimated.valid[m]) {
            return Err(Error::MissingMarkers(format!("tip marker {m}")));
        }
        sum += (actual.markers[m] - estimated.markers[m]).norm();
    }
    Ok(sum / WFD_TIPS.len() as f64)
}

/// Unweighted marker distance (mm): mean distance over all 21 hand markers.
pub fn umd(actual: &HandPose3D, estimated: &HandPose3D) -> Result<f64> {
    let mut sum = 0.0;
    for m in 0..NUM_HAND_MARKERS {
        if !(actual.valid[m] && estimated.valid[m]) {
            return Err(Error::MissingMarkers(format!("hand marker {m}")));
        }
        sum += (actual.markers[m] - estimated.markers[m]).norm();
    }
    Ok(sum / NUM_HAND_MARKERS as f64)
}

/// Empirical quantile with linear interpolation between order statistics
/// (position `(n - 1) q` in the sorted sample).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, q)
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean, first and second tertiles and median of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub t1: f64,
    pub t2: f64,
    pub median: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let mut sorted: Vec<f64> = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            t1: quantile_sorted(&sorted, 1.0 / 3.0),
            t2: quantile_sorted(&sorted, 2.0 / 3.0),
            median: quantile_sorted(&sorted, 0.5),
        }
    }
}

/// Every indicator for one test trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialScores {
    /// Per-joint correlation; `NaN` where it is undefined (a constant
    /// series), see `undefined_joints`.
    pub pcc_per_joint: Vec<f64>,
    pub undefined_joints: Vec<usize>,
    /// Mean of the defined per-joint correlations, with tertiles and median
    /// over joints.
    pub mpcc: Summary,
    pub wfd_series: Vec<f64>,
    /// Mean WFD with tertiles and median over time samples.
    pub md: Summary,
    pub umd_series: Vec<f64>,
    pub umd: Summary,
    /// Samples left out of the distance indicators for missing markers.
    pub excluded_samples: usize,
}

/// Scores aligned actual/estimated sequences. Angle frames may be in any
/// affine scale (correlation is invariant), poses in millimetres.
pub fn score_trial(
    actual_angles: &Frames,
    estimated_angles: &Frames,
    actual_poses: &[HandPose3D],
    estimated_poses: &[HandPose3D],
) -> Result<TrialScores> {
    if actual_angles.width() != estimated_angles.width() || actual_angles.len() != estimated_angles.len() {
        return Err(Error::Contract("actual and estimated angles differ in shape".into()));
    }
    if actual_poses.len() != estimated_poses.len() {
        return Err(Error::Contract("actual and estimated pose sequences differ in length".into()));
    }
    let mut pcc_per_joint = Vec::with_capacity(actual_angles.width());
    let mut undefined_joints = Vec::new();
    for j in 0..actual_angles.width() {
        match pcc(&actual_angles.column(j), &estimated_angles.column(j)) {
            Ok(r) => pcc_per_joint.push(r),
            Err(Error::UndefinedCorrelation(_)) => {
                pcc_per_joint.push(f64::NAN);
                undefined_joints.push(j);
            }
            Err(e) => return Err(e),
        }
    }
    let defined: Vec<f64> = pcc_per_joint.iter().copied().filter(|v| !v.is_nan()).collect();

    let mut wfd_series = Vec::with_capacity(actual_poses.len());
    let mut umd_series = Vec::with_capacity(actual_poses.len());
    let mut excluded_samples = 0;
    for (a, e) in actual_poses.iter().zip(estimated_poses) {
        match (wfd(a, e), umd(a, e)) {
            (Ok(w), Ok(u)) => {
                wfd_series.push(w);
                umd_series.push(u);
            }
            _ => excluded_samples += 1,
        }
    }
    Ok(TrialScores {
        mpcc: Summary::of(&defined),
        pcc_per_joint,
        undefined_joints,
        md: Summary::of(&wfd_series),
        umd: Summary::of(&umd_series),
        wfd_series,
        umd_series,
        excluded_samples,
    })
}
