//! Browser bindings for three small interactive views of the core crate:
//! posing the hand model with forward kinematics, plotting the Butterworth
//! low-pass response, and extracting the RMS envelope of a synthetic EMG
//! burst.
//!
//! Every export is a plain Rust function as well, so the native test suite
//! exercises the same code the page calls. Errors come back as strings,
//! which the JS side receives as thrown exceptions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rpcnet_core::kinematics::{forward_kinematics, Finger, JointAngles, KinematicModel, DOF_TABLE, NUM_DOFS, PALM_MARKERS};
use rpcnet_core::signal::filter::ButterworthLowpass;
use rpcnet_core::signal::{emg_postprocess, PipelineConfig, RawEmgRecording, EMG_SAMPLE_RATE_HZ};
use wasm_bindgen::prelude::*;

type Outcome<T> = Result<T, String>;

/// Names of the 24 degrees of freedom, in model order.
#[wasm_bindgen]
pub fn dof_names() -> Vec<String> {
    DOF_TABLE.iter().map(|d| d.name()).collect()
}

/// Lower and upper limit of each degree of freedom, interleaved.
#[wasm_bindgen]
pub fn joint_limits() -> Vec<f64> {
    KinematicModel::default().joint_limits.iter().flatten().copied().collect()
}

#[wasm_bindgen]
pub fn rest_angles() -> Vec<f64> {
    KinematicModel::default().rest_angles.to_vec()
}

/// Marker positions (x, y, z per slot, millimetres) for the given angles
/// in degrees. Out-of-range angles are clamped to the joint limits first.
#[wasm_bindgen]
pub fn hand_markers(angles_deg: &[f64]) -> Outcome<Vec<f64>> {
    if angles_deg.len() != NUM_DOFS {
        return Err(format!("expected {NUM_DOFS} angles, got {}", angles_deg.len()));
    }
    if angles_deg.iter().any(|a| !a.is_finite()) {
        return Err("angles must be finite".into());
    }
    let model = KinematicModel::default();
    let clamped = angles_deg.iter().enumerate().map(|(i, a)| model.clamp(i, *a)).collect();
    let pose = forward_kinematics(&model, &JointAngles::new(clamped, 0.0)).map_err(|e| e.to_string())?;
    Ok(pose.markers.iter().flat_map(|p| [p.x, p.y, p.z]).collect())
}

/// Marker index pairs to draw as line segments: the palm outline, each
/// digit's chain starting from the nearest palm marker, and the forearm.
#[wasm_bindgen]
pub fn skeleton_edges() -> Vec<u32> {
    let model = KinematicModel::default();
    let rest = forward_kinematics(&model, &JointAngles::rest(&model)).expect("the rest pose is valid");
    let mut edges = Vec::new();
    let palm: Vec<usize> = PALM_MARKERS.collect();
    for (i, &a) in palm.iter().enumerate() {
        edges.extend([a, palm[(i + 1) % palm.len()]]);
    }
    for finger in Finger::ALL {
        let chain: Vec<usize> = finger.markers().collect();
        let base = palm
            .iter()
            .copied()
            .min_by(|&a, &b| {
                let d = |m: usize| (rest.markers[m] - rest.markers[chain[0]]).norm();
                d(a).total_cmp(&d(b))
            })
            .unwrap();
        edges.extend([base, chain[0]]);
        for w in chain.windows(2) {
            edges.extend([w[0], w[1]]);
        }
    }
    edges.extend([21, 22]);
    edges.into_iter().map(|m| m as u32).collect()
}

/// Magnitude of the discrete low-pass (first half of the result) and of
/// its analog prototype (second half) at each frequency.
#[wasm_bindgen]
pub fn butterworth_response(order: usize, cutoff_hz: f64, sample_rate_hz: f64, freqs_hz: &[f64]) -> Outcome<Vec<f64>> {
    if !(1..=12).contains(&order) {
        return Err("order must be between 1 and 12".into());
    }
    if !(sample_rate_hz.is_finite() && cutoff_hz > 0.0 && cutoff_hz < sample_rate_hz / 2.0) {
        return Err("cutoff must lie strictly between 0 and half the sample rate".into());
    }
    let filter = ButterworthLowpass::new(order, cutoff_hz, sample_rate_hz);
    let digital = freqs_hz.iter().map(|&f| filter.magnitude(f));
    let analog = freqs_hz.iter().map(|&f| filter.analog_magnitude(f));
    Ok(digital.chain(analog).collect())
}

/// One channel of synthetic surface EMG at 2048 Hz, in volts: band-limited
/// noise whose amplitude follows a raised-cosine burst every `period_s`.
#[wasm_bindgen]
pub fn synthetic_emg(duration_s: f64, period_s: f64, peak_mv: f64, seed: u64) -> Outcome<Vec<f64>> {
    if !(duration_s > 0.0 && duration_s <= 60.0) {
        return Err("duration must be in (0, 60] s".into());
    }
    if !(period_s > 0.0 && peak_mv >= 0.0 && peak_mv.is_finite()) {
        return Err("period must be positive and peak non-negative".into());
    }
    let n = (duration_s * EMG_SAMPLE_RATE_HZ).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut carrier = ButterworthLowpass::new(4, 450.0, EMG_SAMPLE_RATE_HZ);
    Ok((0..n)
        .map(|i| {
            let t = i as f64 / EMG_SAMPLE_RATE_HZ;
            let envelope = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * t / period_s).cos();
            let noise = carrier.step(rng.random_range(-1.0..1.0)) * 1.7;
            (0.05 + envelope) * peak_mv * 1e-3 * noise
        })
        .collect())
}

/// Envelope of one channel exactly as the processing pipeline computes it:
/// quantisation to amplifier codes, offset removal, rectification,
/// division by 5 mV and sliding RMS.
#[wasm_bindgen]
pub fn rms_envelope(volts: &[f64], window_len: usize, window_step: usize) -> Outcome<Vec<f64>> {
    if window_len == 0 || window_step == 0 {
        return Err("window length and step must be positive".into());
    }
    let cfg = PipelineConfig { window_len, window_step, ..PipelineConfig::default() };
    let mut raw = RawEmgRecording::new(Vec::new());
    raw.codes = vec![volts.iter().map(|&v| raw.code_for_volts(v)).collect()];
    let processed = emg_postprocess(&raw, &cfg).map_err(|e| e.to_string())?;
    Ok(processed.envelope.as_slice().to_vec())
}
