use proptest::prelude::*;
use rpcnet_core::kinematics::{forward_kinematics, JointAngles, KinematicModel, NUM_DOFS};
use rpcnet_core::signal::{emg_postprocess, position_postprocess, PipelineConfig, RawEmgRecording, Timeline};

fn closed_form_len(samples: usize) -> usize {
    (samples - 200) / 25 + 1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn envelope_length_law(samples in 200usize..60_000) {
        let raw = RawEmgRecording::new(vec![vec![0; samples]; 1]);
        let out = emg_postprocess(&raw, &PipelineConfig::default()).unwrap();
        prop_assert_eq!(out.len(), closed_form_len(samples));
    }
}

fn noise_codes(n: usize, seed: u64) -> Vec<i16> {
    // Small deterministic pseudo-random walk, enough to exercise the RMS.
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
    (0..n)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 33) % 2001) as i16 - 1000
        })
        .collect()
}

#[test]
fn envelope_scales_linearly_with_voltage() {
    let base = noise_codes(8192, 3);
    let scaled: Vec<i16> = base.iter().map(|c| c * 3).collect();
    let cfg = PipelineConfig::default();
    let a = emg_postprocess(&RawEmgRecording::new(vec![base]), &cfg).unwrap();
    let b = emg_postprocess(&RawEmgRecording::new(vec![scaled]), &cfg).unwrap();
    for (x, y) in a.envelope.as_slice().iter().zip(b.envelope.as_slice()) {
        assert!((3.0 * x - y).abs() <= 1e-12 * y.abs().max(1e-12), "{x} {y}");
    }
}

#[test]
fn envelope_sample_is_rms_of_its_window() {
    let codes = noise_codes(4000, 9);
    let raw = RawEmgRecording::new(vec![codes.clone()]);
    let cfg = PipelineConfig::default();
    let out = emg_postprocess(&raw, &cfg).unwrap();
    let volts: Vec<f64> = codes.iter().map(|&c| f64::from(c) * raw.volts_per_code()).collect();
    let mean = volts.iter().sum::<f64>() / volts.len() as f64;
    for i in [0, 1, 17, out.len() - 1] {
        let window = &volts[i * 25..i * 25 + 200];
        let rms = (window.iter().map(|v| ((v - mean).abs() / 5e-3).powi(2)).sum::<f64>() / 200.0).sqrt();
        assert!((out.envelope.row(i)[0] - rms).abs() < 1e-12);
    }
    // The envelope timestamps close each RMS window.
    assert!((out.timeline.timestamp(0) - 200.0 / 2048.0).abs() < 1e-15);
    assert!((out.timeline.rate_hz() - 81.92).abs() < 1e-12);
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn sinusoidal_trajectory_survives_the_marker_chain() {
    let model = KinematicModel::default();
    let cfg = PipelineConfig::default();
    let seconds = 20.0;
    let frames_n = (seconds * 100.0) as usize;
    let moving = [1usize, 4, 8, 10, 13, 17, 22];
    let truth = |t: f64, j: usize| {
        let amp = if moving.contains(&j) { 15.0 } else { 0.0 };
        model.rest_angles[j] + amp * (2.0 * std::f64::consts::PI * 0.15 * t + j as f64).sin()
    };
    let frames: Vec<_> = (0..frames_n)
        .map(|k| {
            let t = k as f64 / 100.0;
            let values = (0..NUM_DOFS).map(|j| truth(t, j)).collect();
            forward_kinematics(&model, &JointAngles::new(values, t)).unwrap()
        })
        .collect();
    let samples = (seconds * 2048.0) as usize;
    let timeline = Timeline {
        len: cfg.envelope_len(samples).unwrap(),
        source_rate_hz: 2048.0,
        window_len: 200,
        window_step: 25,
        source_samples: samples,
    };
    let (angles, _) = position_postprocess(&frames, 100.0, &model, &timeline, &cfg).unwrap();
    assert_eq!(angles.len(), closed_form_len(samples));
    for &j in &moving {
        let est = angles.angles.column(j);
        let expected: Vec<f64> =
            (0..angles.len()).map(|i| cfg.normalize_angle(truth(timeline.timestamp(i), j), model.rest_angles[j])).collect();
        let r = pearson(&est, &expected);
        assert!(r > 0.99, "dof {j}: pcc {r}");
    }
}
