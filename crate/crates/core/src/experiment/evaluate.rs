use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plan::HistoryMode;
use crate::data::ProcessedTrial;
use crate::error::{Error, Result};
use crate::kinematics::{forward_kinematics, HandPose3D, JointAngles, KinematicModel, NUM_DOFS};
use crate::metrics::{score_trial, TrialScores};
use crate::network::{infer_recursive_with, smooth_and_project, HistorySeed, RpcNet};
use crate::signal::{Frames, PipelineConfig, ProcessedAngles, HISTORY};

/// Source of the angle estimates being scored.
pub enum Estimator<'a> {
    Network(&'a RpcNet),
    /// The recorded angles themselves; scores are perfect by construction.
    Oracle,
    /// Every joint held at its rest angle.
    RestBaseline,
}

impl Estimator<'_> {
    pub fn label(&self) -> String {
        match self {
            Estimator::Network(net) => net.variant.code(),
            Estimator::Oracle => "oracle".into(),
            Estimator::RestBaseline => "rest".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub subject: String,
    pub trial: String,
    pub estimator: String,
    pub scores: TrialScores,
    /// Range of the unfiltered closed-loop output in normalised units
    /// (network estimators only).
    pub raw_range: Option<(f64, f64)>,
}

fn poses_from(frames: &Frames, model: &KinematicModel, cfg: &PipelineConfig) -> Result<Vec<HandPose3D>> {
    (0..frames.len())
        .into_par_iter()
        .map(|t| {
            let values = frames.row(t).iter().enumerate().map(|(j, v)| cfg.denormalize_angle(*v, model.rest_angles[j])).collect();
            forward_kinematics(model, &JointAngles::new(values, 0.0))
        })
        .collect()
}

/// Scores an estimator on a test trial. The first 64 envelope samples only
/// fill the history and are left out, for every estimator alike. The
/// reference poses are the recorded angles run through forward kinematics,
/// so reference and estimate live in the same model space.
pub fn evaluate_trial(
    estimator: &Estimator<'_>,
    test: &ProcessedTrial,
    model: &KinematicModel,
    cfg: &PipelineConfig,
    history: HistoryMode,
) -> Result<Evaluation> {
    let n = test.angles.len();
    if n <= HISTORY {
        return Err(Error::InputTooShort { needed: HISTORY + 1, got: n });
    }
    let actual = Frames::from_vec(NUM_DOFS, test.angles.angles.as_slice()[HISTORY * NUM_DOFS..].to_vec());
    let actual_poses = poses_from(&actual, model, cfg)?;

    let mut raw_range = None;
    let (estimate, estimate_poses) = match estimator {
        Estimator::Oracle => (actual.clone(), actual_poses.clone()),
        Estimator::RestBaseline => {
            let rest = vec![cfg.normalize_angle(0.0, 0.0); actual.len() * NUM_DOFS];
            let frames = Frames::from_vec(NUM_DOFS, rest);
            let poses = poses_from(&frames, model, cfg)?;
            (frames, poses)
        }
        Estimator::Network(net) => {
            let seed = match history {
                HistoryMode::Rest => HistorySeed::Rest,
                HistoryMode::Recorded => HistorySeed::from_recorded(&test.angles)?,
            };
            let raw: ProcessedAngles = infer_recursive_with(net, &test.emg, &seed, cfg)?;
            let values = raw.angles.as_slice();
            if let Some(v) = values.iter().find(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!("closed-loop estimate diverged to {v}")));
            }
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            raw_range = Some((lo, hi));
            let smoothed = smooth_and_project(&raw, model, cfg)?;
            (smoothed.normalized.angles, smoothed.poses)
        }
    };
    let scores = score_trial(&actual, &estimate, &actual_poses, &estimate_poses)?;
    Ok(Evaluation {
        subject: test.subject_id.clone(),
        trial: test.trial_id.clone(),
        estimator: estimator.label(),
        scores,
        raw_range,
    })
}
