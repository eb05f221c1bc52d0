use ndarray::{s, Array2};
use rayon::prelude::*;

use super::RpcNet;
use crate::error::{Error, Result};
use crate::kinematics::{forward_kinematics, HandPose3D, JointAngles, KinematicModel, NUM_DOFS};
use crate::signal::filter::ButterworthLowpass;
use crate::signal::{Frames, PipelineConfig, ProcessedAngles, ProcessedEmg, HISTORY};

/// Contents of the angle history before the first estimate.
#[derive(Debug, Clone, PartialEq)]
pub enum HistorySeed {
    /// Every joint at its rest angle (normalised value 0.625).
    Rest,
    /// Every joint at one normalised value.
    Constant(f64),
    /// Explicit history, 64 rows of 24 normalised angles, oldest first.
    Recorded(Vec<f64>),
}

impl HistorySeed {
    fn rows(&self, cfg: &PipelineConfig) -> Result<Vec<f64>> {
        match self {
            HistorySeed::Rest => Ok(vec![cfg.normalize_angle(0.0, 0.0); HISTORY * NUM_DOFS]),
            HistorySeed::Constant(v) => Ok(vec![*v; HISTORY * NUM_DOFS]),
            HistorySeed::Recorded(rows) if rows.len() == HISTORY * NUM_DOFS => Ok(rows.clone()),
            HistorySeed::Recorded(rows) => Err(Error::Contract(format!(
                "history seed holds {} values, expected {}",
                rows.len(),
                HISTORY * NUM_DOFS
            ))),
        }
    }

    /// The first 64 rows of a recorded trajectory.
    pub fn from_recorded(angles: &ProcessedAngles) -> Result<Self> {
        if angles.len() < HISTORY || angles.angles.width() != NUM_DOFS {
            return Err(Error::InputTooShort { needed: HISTORY, got: angles.len() });
        }
        Ok(HistorySeed::Recorded(angles.angles.as_slice()[..HISTORY * NUM_DOFS].to_vec()))
    }
}

/// Time steps whose EMG work is precomputed together.
const CHUNK: usize = 512;

/// Closed-loop estimation over a whole trial.
///
/// Each estimate is pushed into the angle history and read back by later
/// steps, so the time loop is sequential. The EMG branch does not depend on
/// the history and is evaluated ahead, one chunk of time steps at a time.
/// The result starts at envelope index 64 and has `emg.len() - 64` rows.
pub fn infer_recursive(net: &RpcNet, emg: &ProcessedEmg, seed: &HistorySeed) -> Result<ProcessedAngles> {
    infer_recursive_with(net, emg, seed, &PipelineConfig::default())
}

pub fn infer_recursive_with(
    net: &RpcNet,
    emg: &ProcessedEmg,
    seed: &HistorySeed,
    cfg: &PipelineConfig,
) -> Result<ProcessedAngles> {
    net.check_consistent()?;
    if emg.len() < HISTORY {
        return Err(Error::InputTooShort { needed: HISTORY, got: emg.len() });
    }
    let layout = &net.layout;
    if let Some(&c) = layout.channels.iter().max() {
        if c >= emg.channels() {
            return Err(Error::ChannelCount { expected: c + 1, found: emg.channels() });
        }
    }
    let l = emg.len();
    let mut history = seed.rows(cfg)?;
    history.resize(l * NUM_DOFS, 0.0);

    let cfg_net = net.config();
    let outputs = cfg_net.outputs;
    let mut emg_rows = Array2::zeros((CHUNK, layout.emg_input_size()));
    let mut angle_input = vec![0.0; layout.angle_input_size()];
    let mut out = vec![0.0; outputs];

    let mut start = HISTORY;
    while start < l {
        let end = (start + CHUNK).min(l);
        let n = end - start;
        for (r, t) in (start..end).enumerate() {
            layout.gather_emg(&emg.envelope, t, emg_rows.row_mut(r).as_slice_mut().unwrap());
        }
        let inputs = emg_rows.slice(s![..n, ..]);
        let contributions: Vec<Array2<f64>> =
            net.networks.par_iter().map(|sub| sub.emg_root_contribution(inputs)).collect();
        for (r, t) in (start..end).enumerate() {
            {
                let hist = &history;
                layout.gather_angles(|s| &hist[s * NUM_DOFS..(s + 1) * NUM_DOFS], t, &mut angle_input);
            }
            for (k, sub) in net.networks.iter().enumerate() {
                sub.finish_from_emg(contributions[k].row(r), &angle_input, &mut out);
                history[t * NUM_DOFS + k * outputs..t * NUM_DOFS + (k + 1) * outputs].copy_from_slice(&out);
            }
        }
        start = end;
    }
    if let Some(i) = history.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("closed-loop estimate diverged at sample {}", i / NUM_DOFS)));
    }
    Ok(ProcessedAngles {
        angles: Frames::from_vec(NUM_DOFS, history.split_off(HISTORY * NUM_DOFS)),
        timeline: emg.timeline,
        offset: HISTORY,
    })
}

/// Filtered estimate in all three representations.
#[derive(Debug, Clone)]
pub struct SmoothedEstimate {
    /// Low-passed normalised angles on the input's timeline.
    pub normalized: ProcessedAngles,
    /// The same, in degrees.
    pub degrees: Vec<JointAngles>,
    /// Marker positions implied by the filtered angles.
    pub poses: Vec<HandPose3D>,
}

/// Fourth-order 1 Hz low-pass (causal, settled on the first sample),
/// conversion back to degrees and forward kinematics.
pub fn smooth_and_project(raw: &ProcessedAngles, model: &KinematicModel, cfg: &PipelineConfig) -> Result<SmoothedEstimate> {
    if raw.angles.width() != NUM_DOFS {
        return Err(Error::Contract(format!("expected {NUM_DOFS} angle channels, got {}", raw.angles.width())));
    }
    let n = raw.len();
    let rate = raw.timeline.rate_hz();
    let columns: Vec<Vec<f64>> = (0..NUM_DOFS)
        .map(|j| ButterworthLowpass::new(4, 1.0, rate).filter(&raw.angles.column(j)))
        .collect();
    let mut filtered = Frames::new(NUM_DOFS);
    let mut row = [0.0; NUM_DOFS];
    for t in 0..n {
        for j in 0..NUM_DOFS {
            row[j] = columns[j][t];
        }
        filtered.push_row(&row);
    }
    let degrees: Vec<JointAngles> = (0..n)
        .map(|t| {
            let values =
                filtered.row(t).iter().enumerate().map(|(j, v)| cfg.denormalize_angle(*v, model.rest_angles[j])).collect();
            JointAngles::new(values, raw.timestamp(t))
        })
        .collect();
    let poses = degrees.par_iter().map(|a| forward_kinematics(model, a)).collect::<Result<Vec<_>>>()?;
    Ok(SmoothedEstimate {
        normalized: ProcessedAngles { angles: filtered, timeline: raw.timeline, offset: raw.offset },
        degrees,
        poses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Timeline;

    fn envelope(len: usize) -> ProcessedEmg {
        let data = (0..len * 96).map(|i| ((i * 31) % 97) as f64 / 97.0).collect();
        ProcessedEmg {
            envelope: Frames::from_vec(96, data),
            timeline: Timeline { len, source_rate_hz: 2048.0, window_len: 200, window_step: 25, source_samples: 0 },
            saturated: 0,
        }
    }

    #[test]
    fn output_length_and_offset() {
        let net = RpcNet::from_code("B1", 1).unwrap();
        let out = infer_recursive(&net, &envelope(700), &HistorySeed::Rest).unwrap();
        assert_eq!(out.len(), 700 - 64);
        assert_eq!(out.offset, 64);
        assert!(matches!(infer_recursive(&net, &envelope(63), &HistorySeed::Rest), Err(Error::InputTooShort { .. })));
    }

    #[test]
    fn b_variant_ignores_history() {
        let net = RpcNet::from_code("B+B1", 2).unwrap();
        let e = envelope(300);
        let a = infer_recursive(&net, &e, &HistorySeed::Rest).unwrap();
        let b = infer_recursive(&net, &e, &HistorySeed::Constant(0.1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rest_stream_projects_to_rest_pose() {
        let model = KinematicModel::default();
        let tl = Timeline { len: 200, source_rate_hz: 2048.0, window_len: 200, window_step: 25, source_samples: 0 };
        let raw = ProcessedAngles { angles: Frames::from_vec(24, vec![0.625; 200 * 24]), timeline: tl, offset: 0 };
        let est = smooth_and_project(&raw, &model, &PipelineConfig::default()).unwrap();
        let rest = forward_kinematics(&model, &JointAngles::rest(&model)).unwrap();
        for pose in &est.poses {
            for (p, q) in pose.markers.iter().zip(&rest.markers) {
                assert!((p - q).norm() < 1e-9);
            }
        }
    }
}
