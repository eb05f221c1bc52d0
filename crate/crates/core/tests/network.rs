use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rpcnet_core::network::{
    infer_recursive, train, Dense, HistorySeed, RpcNet, SubNetwork, SubNetworkConfig, TrainingConfig,
};
use rpcnet_core::signal::{Frames, ProcessedAngles, ProcessedEmg, Timeline, HISTORY};

fn mse(net: &SubNetwork, emg: &Array2<f64>, ang: &Option<Array2<f64>>, targets: &Array2<f64>) -> f64 {
    let acts = net.forward_batch(emg.view(), ang.as_ref().map(|a| a.view())).unwrap();
    let d = &acts.output - targets;
    d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64
}

fn random_config(rng: &mut impl Rng) -> SubNetworkConfig {
    let with_angles = rng.random_bool(0.7);
    let cfg = SubNetworkConfig {
        emg_input: rng.random_range(2..9),
        emg_hidden: rng.random_range(1..6),
        angle_input: if with_angles { rng.random_range(1..6) } else { 0 },
        angle_hidden: 0,
        angle_output: 0,
        root_hidden: rng.random_range(1..5),
        outputs: rng.random_range(1..4),
    };
    if with_angles {
        SubNetworkConfig { angle_hidden: rng.random_range(1..4), angle_output: rng.random_range(1..4), ..cfg }
    } else {
        cfg
    }
}

/// Largest guarded relative error between the analytic gradient and central
/// differences with step 1e-5.
fn worst_gradient_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = random_config(&mut rng);
    let mut net = SubNetwork::new(cfg, &mut rng).unwrap();
    let batch = rng.random_range(1..5);
    let emg = Array2::from_shape_simple_fn((batch, cfg.emg_input), || rng.random_range(0.0..1.0));
    let ang = cfg.has_angle_branch()
        .then(|| Array2::from_shape_simple_fn((batch, cfg.angle_input), || rng.random_range(0.0..1.0)));
    let targets = Array2::from_shape_simple_fn((batch, cfg.outputs), || rng.random_range(0.0..1.0));

    let acts = net.forward_batch(emg.view(), ang.as_ref().map(|a| a.view())).unwrap();
    let n = targets.len() as f64;
    let grad_out = (&acts.output - &targets).mapv(|d| 2.0 * d / n);
    let grads: Vec<Dense> = net.backward(emg.view(), ang.as_ref().map(|a| a.view()), &acts, grad_out.view());

    let analytic: Vec<f64> = grads.iter().flat_map(|g| g.parameters().copied().collect::<Vec<_>>()).collect();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut index = 0;
    for layer in 0..net.layers.len() {
        let count = net.layers[layer].parameter_count();
        for p in 0..count {
            let original = *net.layers[layer].parameters_mut().nth(p).unwrap();
            *net.layers[layer].parameters_mut().nth(p).unwrap() = original + h;
            let plus = mse(&net, &emg, &ang, &targets);
            *net.layers[layer].parameters_mut().nth(p).unwrap() = original - h;
            let minus = mse(&net, &emg, &ang, &targets);
            *net.layers[layer].parameters_mut().nth(p).unwrap() = original;
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[index];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(err);
            index += 1;
        }
    }
    worst
}

#[test]
fn analytic_gradients_match_central_differences() {
    let worst = (0..50).map(worst_gradient_error).fold(0.0, f64::max);
    assert!(worst < 1e-4, "worst relative gradient error {worst}");
}

fn timeline(len: usize) -> Timeline {
    Timeline { len, source_rate_hz: 2048.0, window_len: 200, window_step: 25, source_samples: (len - 1) * 25 + 200 }
}

fn random_trial(len: usize, seed: u64) -> (ProcessedEmg, ProcessedAngles) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let emg = (0..len * 96).map(|_| rng.random_range(0.0..0.3)).collect();
    let ang = (0..len * 24).map(|i| 0.625 + 0.1 * ((i / 24) as f64 * 0.05 + (i % 24) as f64).sin()).collect();
    (
        ProcessedEmg { envelope: Frames::from_vec(96, emg), timeline: timeline(len), saturated: 0 },
        ProcessedAngles { angles: Frames::from_vec(24, ang), timeline: timeline(len), offset: 0 },
    )
}

#[test]
fn recursion_matches_teacher_forced_passes_on_its_own_outputs() {
    let net = RpcNet::from_code("C2+emg-0.2", 8).unwrap();
    let (emg, angles) = random_trial(400, 1);
    let seed = HistorySeed::from_recorded(&angles).unwrap();
    let out = infer_recursive(&net, &emg, &seed).unwrap();
    let mut trajectory = angles.angles.as_slice()[..HISTORY * 24].to_vec();
    trajectory.extend_from_slice(out.angles.as_slice());
    let traj = Frames::from_vec(24, trajectory);
    let mut emg_in = vec![0.0; net.layout.emg_input_size()];
    let mut ang_in = vec![0.0; net.layout.angle_input_size()];
    for t in HISTORY..emg.len() {
        net.layout.gather_emg(&emg.envelope, t, &mut emg_in);
        net.layout.gather_angles(|s| traj.row(s), t, &mut ang_in);
        let direct = net.forward(&emg_in, &ang_in).unwrap();
        for (a, b) in direct.iter().zip(out.angles.row(t - HISTORY)) {
            assert!((a - b).abs() < 1e-12, "t={t}: {a} vs {b}");
        }
    }
}

#[test]
fn identity_on_history_reproduces_recorded_angles() {
    // Each sub-network copies its own joint from the newest history sample
    // (eight steps back). A period-8 trajectory is then a fixed point of the
    // closed loop, so recursion and teacher forcing must coincide.
    let mut net = RpcNet::from_code("C1", 0).unwrap();
    let cfg = net.config();
    let newest = (net.layout.angle_samples - 1) * 24;
    for (k, sub) in net.networks.iter_mut().enumerate() {
        let mut zero = SubNetwork::zeros(cfg).unwrap();
        zero.layers[2].weights[[0, newest + k]] = 1.0;
        zero.layers[3].weights[[0, 0]] = 1.0;
        zero.layers[4].weights[[0, cfg.emg_hidden]] = 1.0;
        zero.layers[5].weights[[0, 0]] = 1.0;
        *sub = zero;
    }
    let len = 300;
    let values: Vec<f64> = (0..len * 24)
        .map(|i| 0.5 + 0.3 * (std::f64::consts::TAU * ((i / 24) % 8) as f64 / 8.0 + (i % 24) as f64).sin())
        .collect();
    let recorded = ProcessedAngles { angles: Frames::from_vec(24, values), timeline: timeline(len), offset: 0 };
    let (emg, _) = random_trial(len, 2);
    let out = infer_recursive(&net, &emg, &HistorySeed::from_recorded(&recorded).unwrap()).unwrap();
    let windows = rpcnet_core::signal::make_training_windows_with(&emg, &recorded, &net.layout).unwrap();
    for i in 0..windows.len() {
        let w = windows.window(i);
        let forced = net.forward_window(&w).unwrap();
        assert_eq!(forced.as_slice(), out.angles.row(i));
        for (a, b) in forced.iter().zip(&w.target) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}

#[test]
fn b_variant_outputs_ignore_history_permutations() {
    let net = RpcNet::from_code("B+C4", 3).unwrap();
    let (emg, angles) = random_trial(250, 3);
    let rows = angles.angles.as_slice()[..HISTORY * 24].to_vec();
    let mut permuted = rows.clone();
    permuted.reverse();
    let a = infer_recursive(&net, &emg, &HistorySeed::Recorded(rows)).unwrap();
    let b = infer_recursive(&net, &emg, &HistorySeed::Recorded(permuted)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn training_is_deterministic_for_a_seed() {
    let (emg, angles) = random_trial(200, 4);
    let cfg = TrainingConfig { epochs: 2, seed: 11, ..TrainingConfig::default() };
    let run = || {
        let mut net = RpcNet::from_code("C3+emg-0.3", 5).unwrap();
        let report = train(&mut net, &[(&emg, &angles)], &cfg).unwrap();
        (net, report)
    };
    let (a, ra) = run();
    let (b, rb) = run();
    assert_eq!(a, b);
    assert_eq!(ra, rb);
    assert_eq!(ra.epoch_loss.len(), 2);
    assert_ne!(a, RpcNet::from_code("C3+emg-0.3", 5).unwrap());
}

#[test]
fn constant_target_is_learned() {
    let (emg, mut angles) = random_trial(300, 6);
    angles.angles = Frames::from_vec(24, vec![0.4; 300 * 24]);
    let mut net = RpcNet::from_code("B+C5+emg-0.2", 1).unwrap();
    // A larger step than the default keeps this capacity check short.
    let cfg = TrainingConfig { learning_rate: 1e-3, epochs: 15, ..TrainingConfig::default() };
    let report = train(&mut net, &[(&emg, &angles)], &cfg).unwrap();
    let first = report.epoch_loss[0];
    let last = *report.epoch_loss.last().unwrap();
    assert!(last < 0.05 * first, "loss {first} -> {last}");
    let out = infer_recursive(&net, &emg, &HistorySeed::Rest).unwrap();
    let mean = out.angles.as_slice().iter().sum::<f64>() / out.angles.as_slice().len() as f64;
    assert!((mean - 0.4).abs() < 0.02, "mean output {mean}");
}

#[test]
fn b_variant_trains_without_angle_branch() {
    let (emg, angles) = random_trial(150, 7);
    let mut net = RpcNet::from_code("B", 2).unwrap();
    assert!(net.networks.iter().all(|n| n.angle_layers().is_none()));
    let cfg = TrainingConfig { epochs: 1, ..TrainingConfig::default() };
    let report = train(&mut net, &[(&emg, &angles)], &cfg).unwrap();
    assert_eq!(report.windows, 150 - HISTORY);
}

#[test]
fn empty_training_set_rejected() {
    let mut net = RpcNet::from_code("B+C1", 0).unwrap();
    assert!(train(&mut net, &[], &TrainingConfig::default()).is_err());
}
