use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rpcnet_wasm_demo::*;

fn point(flat: &[f64], i: usize) -> [f64; 3] {
    [flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]]
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn posing_keeps_bone_lengths() {
    let limits = joint_limits();
    let rest = hand_markers(&rest_angles()).unwrap();
    assert_eq!(rest.len(), 23 * 3);
    assert_eq!(dof_names().len(), 24);
    let edges = skeleton_edges();
    assert_eq!(edges.len() % 2, 0);
    assert!(edges.iter().all(|&m| m < 23));

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let angles: Vec<f64> = (0..24).map(|i| rng.random_range(limits[2 * i]..=limits[2 * i + 1])).collect();
        let posed = hand_markers(&angles).unwrap();
        // Digit chains are rigid links: consecutive chain markers keep
        // their rest distance whatever the angles.
        for d in 0..5 {
            let m = 6 + 3 * d;
            for (a, b) in [(m, m + 1), (m + 1, m + 2)] {
                let want = dist(point(&rest, a), point(&rest, b));
                assert!((dist(point(&posed, a), point(&posed, b)) - want).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn posing_rejects_bad_input_and_clamps_range() {
    assert!(hand_markers(&[0.0; 23]).is_err());
    let mut angles = rest_angles();
    angles[5] = f64::NAN;
    assert!(hand_markers(&angles).is_err());

    let limits = joint_limits();
    let mut beyond = rest_angles();
    let mut at_limit = rest_angles();
    beyond[10] = limits[21] + 90.0;
    at_limit[10] = limits[21];
    assert_eq!(hand_markers(&beyond).unwrap(), hand_markers(&at_limit).unwrap());
}

#[test]
fn butterworth_response_follows_the_analog_law() {
    let freqs = [0.0, 10.0, 100.0];
    let r = butterworth_response(2, 10.0, 2048.0, &freqs).unwrap();
    let (digital, analog) = r.split_at(3);
    assert!((analog[0] - 1.0).abs() < 1e-12);
    assert!((analog[1] - 0.5f64.sqrt()).abs() < 1e-12);
    assert!((analog[2] - 1.0 / (1.0f64 + 1e4).sqrt()).abs() < 1e-12);
    assert!((digital[0] - 1.0).abs() < 1e-9);
    assert!((digital[1] / analog[1] - 1.0).abs() < 0.02);

    assert!(butterworth_response(2, 1024.0, 2048.0, &freqs).is_err());
    assert!(butterworth_response(0, 10.0, 2048.0, &freqs).is_err());
    assert!(butterworth_response(2, -1.0, 2048.0, &freqs).is_err());
}

#[test]
fn envelope_of_square_wave_is_its_amplitude() {
    let volts: Vec<f64> = (0..4096).map(|i| if i % 2 == 0 { 2.5e-3 } else { -2.5e-3 }).collect();
    let env = rms_envelope(&volts, 200, 25).unwrap();
    assert_eq!(env.len(), (4096 - 200) / 25 + 1);
    // Quantisation to amplifier codes moves the level by far less than 1e-3.
    assert!(env.iter().all(|v| (v - 0.5).abs() < 1e-3));
    assert!(rms_envelope(&volts, 0, 25).is_err());
    assert!(rms_envelope(&volts[..100], 200, 25).is_err());
}

#[test]
fn synthetic_burst_shows_in_the_envelope() {
    let a = synthetic_emg(4.0, 2.0, 1.0, 3).unwrap();
    assert_eq!(a, synthetic_emg(4.0, 2.0, 1.0, 3).unwrap());
    assert_ne!(a, synthetic_emg(4.0, 2.0, 1.0, 4).unwrap());
    assert_eq!(a.len(), 4 * 2048);

    let env = rms_envelope(&a, 200, 25).unwrap();
    // Envelope sample i covers source samples starting at 25 i; the burst
    // peaks at t = 1 s and is quietest near t = 2 s.
    let at = |t: f64| env[((t * 2048.0 - 100.0) / 25.0) as usize];
    assert!(at(1.0) > 5.0 * at(1.95), "{} vs {}", at(1.0), at(1.95));
    assert!(synthetic_emg(0.0, 1.0, 1.0, 0).is_err());
}
