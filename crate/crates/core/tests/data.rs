use std::path::Path;

use nalgebra::DMatrix;
use rpcnet_core::data::{
    generate_synthetic_trial, import_all, load_trial, save_trial, synthetic_angles, write_angles_csv,
    write_markers_csv, MixingMatrix, Role, SyntheticSpec, TrialImporter, TrialRecord, SIGNAL_REFERENCE_V,
};
use rpcnet_core::kinematics::{inverse_kinematics, KinematicModel};
use rpcnet_core::metrics::pcc;
use rpcnet_core::signal::filter::interpolate_linear;
use rpcnet_core::signal::{emg_postprocess, PipelineConfig};
use rpcnet_core::Error;

fn spec(duration_s: f64, seed: u64) -> SyntheticSpec {
    SyntheticSpec::new(duration_s, seed, MixingMatrix::random(1000 + seed, 4))
}

fn small_trial(seed: u64) -> TrialRecord {
    generate_synthetic_trial(&spec(3.0, seed), &KinematicModel::default()).unwrap()
}

#[test]
fn round_trip_is_bit_identical() {
    let trial = small_trial(1);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.rpct");
    save_trial(&path, &trial).unwrap();
    let back = load_trial(&path).unwrap();
    assert_eq!(back, trial);
    assert_eq!(back.raw_emg.codes, trial.raw_emg.codes);
    for (a, b) in back.markers.iter().zip(&trial.markers) {
        for (p, q) in a.markers.iter().zip(&b.markers) {
            assert_eq!(p.coords.map(f64::to_bits), q.coords.map(f64::to_bits));
        }
    }
    assert!(!dir.path().join("t.partial").exists());
}

#[test]
fn load_errors_are_distinct() {
    let trial = small_trial(2);
    let bytes = trial.to_bytes().unwrap();
    for cut in [10, bytes.len() / 2, bytes.len() - 1] {
        assert!(matches!(TrialRecord::from_bytes(&bytes[..cut]), Err(Error::Corrupt(_))), "cut at {cut}");
    }

    let mut narrow = trial.clone();
    narrow.raw_emg.codes.pop();
    let err = TrialRecord::from_bytes(&narrow.to_bytes().unwrap()).unwrap_err();
    assert!(matches!(err, Error::ChannelCount { expected: 96, found: 95 }));
    assert!(err.to_string().contains("96"));

    let mut short = trial.clone();
    short.markers.truncate(short.markers.len() - 20);
    assert!(matches!(TrialRecord::from_bytes(&short.to_bytes().unwrap()), Err(Error::DurationMismatch { .. })));

    let mut future = bytes.clone();
    future[4] = 2;
    assert!(matches!(TrialRecord::from_bytes(&future), Err(Error::UnsupportedVersion { found: 2, .. })));

    let missing = load_trial(Path::new("/nonexistent/trial.rpct")).unwrap_err();
    assert!(missing.to_string().contains("/nonexistent/trial.rpct"));
}

#[test]
fn same_seed_same_trial() {
    assert_eq!(small_trial(3), small_trial(3));
    assert_ne!(small_trial(3).raw_emg.codes, small_trial(4).raw_emg.codes);
}

#[test]
fn zero_motion_gives_still_markers_and_noise_only() {
    let model = KinematicModel::default();
    let mut s = spec(3.0, 5);
    s.motion_amplitude = 0.0;
    let trial = generate_synthetic_trial(&s, &model).unwrap();
    let first = &trial.markers[0];
    assert!(trial.markers.iter().all(|p| p.markers == first.markers));

    // The envelope equals the RMS of white noise at the configured level.
    let env = emg_postprocess(&trial.raw_emg, &PipelineConfig::default()).unwrap();
    let expected = s.noise_level * SIGNAL_REFERENCE_V / 5e-3;
    let mean = env.envelope.as_slice().iter().sum::<f64>() / env.envelope.as_slice().len() as f64;
    assert!((mean / expected - 1.0).abs() < 0.05, "mean envelope {mean}, expected {expected}");

    s.noise_level = 0.0;
    let silent = generate_synthetic_trial(&s, &model).unwrap();
    assert!(silent.raw_emg.codes.iter().flatten().all(|&c| c == 0));
}

#[test]
fn invalid_specs_are_rejected() {
    let model = KinematicModel::default();
    let mut s = spec(1.5, 0);
    assert!(matches!(generate_synthetic_trial(&s, &model), Err(Error::Config(_))));
    s.duration_s = 3.0;
    s.mixing.weights[7] = -0.1;
    assert!(matches!(generate_synthetic_trial(&s, &model), Err(Error::Config(_))));
}

#[test]
fn markers_match_generating_angles() {
    let model = KinematicModel::default();
    let s = spec(3.0, 6);
    let trial = generate_synthetic_trial(&s, &model).unwrap();
    let truth = synthetic_angles(&s, &model).unwrap();
    assert_eq!(truth.len(), trial.markers.len());
    for k in (0..truth.len()).step_by(37) {
        let ik = inverse_kinematics(&model, &trial.markers[k]).unwrap();
        assert!(ik.approximation_error_mm < 0.5, "frame {k}: {} mm", ik.approximation_error_mm);
        for (a, b) in ik.angles.values.iter().zip(&truth[k].values) {
            assert!((a - b).abs() < 1.0, "frame {k}: {a} vs {b}");
        }
    }
}

/// Ridge regression from envelope to angles, fitted on the first 70% of a
/// trial and scored on the rest.
#[test]
fn synthetic_task_is_linearly_decodable() {
    let model = KinematicModel::default();
    let s = spec(120.0, 7);
    let trial = generate_synthetic_trial(&s, &model).unwrap();
    let cfg = PipelineConfig::default();
    let env = emg_postprocess(&trial.raw_emg, &cfg).unwrap();
    let truth = synthetic_angles(&s, &model).unwrap();
    let frame_t: Vec<f64> = truth.iter().map(|a| a.timestamp).collect();
    let times = env.timeline.timestamps();
    let targets: Vec<Vec<f64>> = (0..24)
        .map(|j| {
            let v: Vec<f64> = truth.iter().map(|a| a.values[j]).collect();
            interpolate_linear(&frame_t, &v, &times)
        })
        .collect();

    let n = env.len();
    let split = n * 7 / 10;
    let features = |t: usize| -> Vec<f64> {
        let mut row = vec![1.0];
        row.extend_from_slice(env.envelope.row(t));
        row
    };
    let p = 97;
    let x = DMatrix::from_fn(split, p, |i, k| features(i)[k]);
    let y = DMatrix::from_fn(split, 24, |i, j| targets[j][i]);
    let lambda = 1e-6 * (x.transpose() * &x).trace() / p as f64;
    let gram = x.transpose() * &x + DMatrix::identity(p, p) * lambda;
    let w = gram.cholesky().unwrap().solve(&(x.transpose() * &y));

    let xt = DMatrix::from_fn(n - split, p, |i, k| features(split + i)[k]);
    let pred = xt * w;
    let mut total = 0.0;
    for j in 0..24 {
        let est: Vec<f64> = pred.column(j).iter().copied().collect();
        total += pcc(&targets[j][split..], &est).unwrap();
    }
    let mpcc = total / 24.0;
    assert!(mpcc > 0.6, "ridge MPCC {mpcc}");
}

struct FakeArchive;

impl TrialImporter for FakeArchive {
    fn name(&self) -> &str {
        "fake"
    }

    fn list(&self, _root: &Path) -> rpcnet_core::Result<Vec<(String, String)>> {
        Ok(vec![("S0".into(), "1".into()), ("S0".into(), "2".into())])
    }

    fn import(&self, _root: &Path, subject_id: &str, trial_id: &str) -> rpcnet_core::Result<TrialRecord> {
        let mut t = small_trial(trial_id.parse().unwrap());
        t.subject_id = subject_id.into();
        t.trial_id = trial_id.into();
        t.role = Role::Test;
        Ok(t)
    }
}

#[test]
fn importer_hook_validates_and_tags() {
    let trials = import_all(&FakeArchive, Path::new(".")).unwrap();
    assert_eq!(trials.len(), 2);
    assert!(trials.iter().all(|t| t.metadata.notes["importer"] == "fake" && t.subject_id == "S0"));
}

#[test]
fn csv_exports_have_one_row_per_sample() {
    let trial = small_trial(8);
    let mut buf = Vec::new();
    write_markers_csv(&trial, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), trial.markers.len() + 1);
    assert_eq!(text.lines().next().unwrap().split(',').count(), 1 + 23 * 3);

    let env = emg_postprocess(&trial.raw_emg, &PipelineConfig::default()).unwrap();
    let frames = rpcnet_core::signal::Frames::from_vec(24, vec![0.5; 24 * env.len()]);
    let mut buf = Vec::new();
    write_angles_csv(&frames, &env.timeline, 0, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("time_s,"));
    assert_eq!(text.lines().count(), env.len() + 1);
}
