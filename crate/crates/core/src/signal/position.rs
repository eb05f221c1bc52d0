use nalgebra::Point3;
use rayon::prelude::*;

use super::filter::{interpolate_linear, moving_average_masked};
use super::{Frames, PipelineConfig, ProcessedAngles, Timeline};
use crate::error::{Error, Result};
use crate::kinematics::{inverse_kinematics, ChainStatus, Finger, HandPose3D, KinematicModel, NUM_DOFS, NUM_MARKERS};

/// What happened to individual frames on the way to angles.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PositionQuality {
    /// Frames where at least one digit was held at the previous frame's angles.
    pub held_frames: Vec<usize>,
    /// Frames where the palm could not be solved; their angles were
    /// interpolated from the neighbouring frames.
    pub interpolated_frames: Vec<usize>,
    /// Digit fits that ran out of budget (best iterate kept).
    pub unconverged_chains: usize,
    /// Mean marker approximation error over solved frames (mm).
    pub mean_ik_error_mm: f64,
}

fn smooth_markers(frames: &[HandPose3D], order: usize) -> Vec<HandPose3D> {
    let n = frames.len();
    let mut out: Vec<HandPose3D> = frames.to_vec();
    for m in 0..NUM_MARKERS {
        let valid: Vec<bool> = frames.iter().map(|f| f.valid[m]).collect();
        let coords: [Vec<Option<f64>>; 3] = std::array::from_fn(|axis| {
            let x: Vec<f64> = frames.iter().map(|f| if f.valid[m] { f.markers[m][axis] } else { 0.0 }).collect();
            moving_average_masked(&x, &valid, order)
        });
        for k in 0..n {
            match (coords[0][k], coords[1][k], coords[2][k]) {
                (Some(x), Some(y), Some(z)) if valid[k] => out[k].markers[m] = Point3::new(x, y, z),
                _ => out[k].valid[m] = false,
            }
        }
    }
    out
}

/// Marker stream to normalised joint angles on the envelope timeline:
/// moving average of every coordinate, inverse kinematics per frame, rest
/// subtraction, normalisation, then linear interpolation to `timeline`.
///
/// A digit with missing markers holds its angles from the previous frame.
/// Frames whose palm cannot be solved are interpolated over.
pub fn position_postprocess(
    frames: &[HandPose3D],
    marker_rate_hz: f64,
    model: &KinematicModel,
    timeline: &Timeline,
    cfg: &PipelineConfig,
) -> Result<(ProcessedAngles, PositionQuality)> {
    if frames.is_empty() {
        return Err(Error::InvalidInput("empty marker stream".into()));
    }
    let markers_s = frames.len() as f64 / marker_rate_hz;
    let emg_s = timeline.source_duration_s();
    if (markers_s - emg_s).abs() > 1.0 / marker_rate_hz {
        return Err(Error::Alignment(format!(
            "marker stream covers {markers_s:.3} s but the EMG covers {emg_s:.3} s"
        )));
    }
    for f in frames {
        f.check()?;
    }

    let smoothed = smooth_markers(frames, cfg.moving_average_order);
    let solved: Vec<_> = smoothed.par_iter().map(|pose| inverse_kinematics(model, pose)).collect();

    let mut quality = PositionQuality::default();
    let mut angles: Vec<Option<Vec<f64>>> = Vec::with_capacity(frames.len());
    let mut previous: Option<Vec<f64>> = None;
    let mut error_sum = 0.0;
    let mut error_count = 0usize;
    for (k, result) in solved.into_iter().enumerate() {
        match result {
            Ok(ik) => {
                let mut values = ik.angles.values;
                let mut held = false;
                for f in Finger::ALL {
                    match ik.chain_status[f.index()] {
                        ChainStatus::MissingMarkers => {
                            if let Some(prev) = &previous {
                                values[f.dofs()].copy_from_slice(&prev[f.dofs()]);
                            }
                            held = true;
                        }
                        ChainStatus::NotConverged => quality.unconverged_chains += 1,
                        ChainStatus::Converged => {}
                    }
                }
                if held {
                    quality.held_frames.push(k);
                }
                if ik.approximation_error_mm.is_finite() {
                    error_sum += ik.approximation_error_mm;
                    error_count += 1;
                }
                previous = Some(values.clone());
                angles.push(Some(values));
            }
            Err(Error::DegeneratePose(_)) => {
                quality.interpolated_frames.push(k);
                angles.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    quality.mean_ik_error_mm = if error_count > 0 { error_sum / error_count as f64 } else { f64::NAN };

    let good: Vec<usize> = (0..angles.len()).filter(|&k| angles[k].is_some()).collect();
    if good.is_empty() {
        return Err(Error::DegeneratePose("no frame of the stream could be solved".into()));
    }
    let good_times: Vec<f64> = good.iter().map(|&k| k as f64 / marker_rate_hz).collect();
    let targets = timeline.timestamps();
    let mut columns = Vec::with_capacity(NUM_DOFS);
    for j in 0..NUM_DOFS {
        let normalized: Vec<f64> = good
            .iter()
            .map(|&k| cfg.normalize_angle(angles[k].as_ref().unwrap()[j], model.rest_angles[j]))
            .collect();
        columns.push(interpolate_linear(&good_times, &normalized, &targets));
    }
    let mut out = Frames::new(NUM_DOFS);
    let mut row = [0.0; NUM_DOFS];
    for t in 0..timeline.len {
        for j in 0..NUM_DOFS {
            row[j] = columns[j][t];
        }
        out.push_row(&row);
    }
    Ok((ProcessedAngles { angles: out, timeline: *timeline, offset: 0 }, quality))
}

/// Recorded marker positions interpolated onto the envelope timestamps.
/// A marker is valid in the output when both bracketing frames are valid.
pub fn resample_poses(frames: &[HandPose3D], marker_rate_hz: f64, timeline: &Timeline) -> Vec<HandPose3D> {
    let last = frames.len() - 1;
    timeline
        .timestamps()
        .into_iter()
        .map(|t| {
            let pos = (t * marker_rate_hz).clamp(0.0, last as f64);
            let k0 = (pos.floor() as usize).min(last);
            let k1 = (k0 + 1).min(last);
            let w = pos - k0 as f64;
            let (a, b) = (&frames[k0], &frames[k1]);
            let markers = a.markers.iter().zip(&b.markers).map(|(p, q)| p + (q - p) * w).collect();
            let valid = a.valid.iter().zip(&b.valid).map(|(u, v)| *u && *v).collect();
            HandPose3D { markers, valid, timestamp: t }
        })
        .collect()
}
