use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rpcnet_core::kinematics::{forward_kinematics, JointAngles, KinematicModel};
use rpcnet_core::metrics::{
    average_ranks, linreg_slope_test, paired_t_one_sided, score_trial, sign_test_one_sided,
    wilcoxon_signed_rank_one_sided, Alternative,
};
use rpcnet_core::signal::Frames;

/// Tail probability of the signed-rank statistic by listing all 2^n sign
/// assignments of the observed ranks.
fn enumerated_p(x: &[f64], y: &[f64], alternative: Alternative) -> (f64, f64) {
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|v| *v != 0.0).collect();
    let ranks = average_ranks(&d.iter().map(|v| v.abs()).collect::<Vec<_>>());
    let w: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let n = d.len();
    let mut hits = 0u64;
    for mask in 0u64..(1 << n) {
        let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        let hit = match alternative {
            Alternative::Less => s <= w + 1e-9,
            Alternative::Greater => s >= w - 1e-9,
        };
        hits += hit as u64;
    }
    (w, hits as f64 / (1u64 << n) as f64)
}

#[test]
fn wilcoxon_exact_p_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..200 {
        let n = 1 + case % 10;
        // Rounded values produce ties and zero differences.
        let x: Vec<f64> = (0..n).map(|_| (rng.random_range(-3.0f64..3.0) * 2.0).round() / 2.0).collect();
        let y: Vec<f64> = (0..n).map(|_| (rng.random_range(-3.0f64..3.0) * 2.0).round() / 2.0).collect();
        for alt in [Alternative::Less, Alternative::Greater] {
            match wilcoxon_signed_rank_one_sided(&x, &y, alt) {
                Ok(r) => {
                    let (w, p) = enumerated_p(&x, &y, alt);
                    assert_eq!(r.statistic, w);
                    assert!((r.p - p).abs() < 1e-12, "n={n} {alt:?}: {} vs {p}", r.p);
                }
                Err(_) => assert!(x.iter().zip(&y).all(|(a, b)| a == b)),
            }
        }
    }
}

#[test]
fn wilcoxon_eight_pairs() {
    let x = [1.83, 0.50, 1.62, 2.48, 1.68, 1.88, 1.55, 3.06];
    let y = [0.878, 0.647, 0.598, 2.05, 1.06, 1.29, 1.06, 3.14];
    let r = wilcoxon_signed_rank_one_sided(&x, &y, Alternative::Greater).unwrap();
    let (w, p) = enumerated_p(&x, &y, Alternative::Greater);
    assert_eq!(r.statistic, w);
    assert_eq!(w, 33.0);
    assert!((r.p - p).abs() < 1e-15);
    assert!((p - 5.0 / 256.0).abs() < 1e-15);
}

#[test]
fn paired_t_hand_computation() {
    let x = [10.0, 12.0, 9.0, 11.0, 13.0];
    let y = [8.0, 11.0, 9.0, 9.0, 10.0];
    // Differences 2, 1, 0, 2, 3: mean 1.6, sample variance 5.2 / 4.
    let t = 1.6 / (1.3f64 / 5.0).sqrt();
    let r = paired_t_one_sided(&x, &y, Alternative::Greater).unwrap();
    assert!((r.statistic - t).abs() < 1e-6);
    assert!((r.statistic - 3.1379).abs() < 1e-3);
    assert_eq!(r.n, 4);
    // Table value: the one-sided 2.5% critical t with 4 df is 2.776, the
    // 1% value 3.747, so p lies between.
    assert!(r.p > 0.01 && r.p < 0.025, "p = {}", r.p);
    let less = paired_t_one_sided(&x, &y, Alternative::Less).unwrap();
    assert!((less.p + r.p - 1.0).abs() < 1e-12);
}

#[test]
fn t_is_scale_and_shift_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x: Vec<f64> = (0..12).map(|_| rng.random_range(20.0..40.0)).collect();
    let y: Vec<f64> = (0..12).map(|_| rng.random_range(20.0..40.0)).collect();
    let base = paired_t_one_sided(&x, &y, Alternative::Less).unwrap();
    let scaled = paired_t_one_sided(
        &x.iter().map(|v| v * 3.7).collect::<Vec<_>>(),
        &y.iter().map(|v| v * 3.7).collect::<Vec<_>>(),
        Alternative::Less,
    )
    .unwrap();
    let shifted = paired_t_one_sided(
        &x.iter().map(|v| v + 11.0).collect::<Vec<_>>(),
        &y.iter().map(|v| v + 11.0).collect::<Vec<_>>(),
        Alternative::Less,
    )
    .unwrap();
    for other in [scaled, shifted] {
        assert!((other.statistic - base.statistic).abs() < 1e-9);
        assert!((other.p - base.p).abs() < 1e-9);
    }
}

#[test]
fn ols_matches_normal_equations() {
    let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let y = [2.1, 3.9, 6.2, 7.8, 10.1, 12.2];
    let n = 6.0;
    let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
    let det = n * sxx - sx * sx;
    let b1 = (n * sxy - sx * sy) / det;
    let b0 = (sxx * sy - sx * sxy) / det;
    let sse: f64 = x.iter().zip(&y).map(|(a, b)| (b - b0 - b1 * a).powi(2)).sum();
    let se = (sse / (n - 2.0) * n / det).sqrt();
    let sst: f64 = y.iter().map(|v| (v - sy / n).powi(2)).sum();
    let r = linreg_slope_test(&x, &y).unwrap();
    assert!((r.slope - b1).abs() < 1e-6);
    assert!((r.intercept - b0).abs() < 1e-6);
    assert!((r.slope_se - se).abs() < 1e-6);
    assert!((r.t - b1 / se).abs() < 1e-6);
    assert!((r.r_squared - (1.0 - sse / sst)).abs() < 1e-6);
    assert!((r.adjusted_r_squared - (1.0 - (sse / sst) * 5.0 / 4.0)).abs() < 1e-6);
    assert!(r.p < 1e-4);
}

proptest! {
    #[test]
    fn p_values_are_probabilities(
        x in prop::collection::vec(-5.0f64..5.0, 3..40),
        shift in -1.0f64..1.0,
        noise_seed in 0u64..1000,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
        let y: Vec<f64> = x.iter().map(|v| v + shift + rng.random_range(-1.0..1.0)).collect();
        for alt in [Alternative::Less, Alternative::Greater] {
            if let Ok(r) = paired_t_one_sided(&x, &y, alt) { prop_assert!((0.0..=1.0).contains(&r.p)); }
            if let Ok(r) = wilcoxon_signed_rank_one_sided(&x, &y, alt) { prop_assert!((0.0..=1.0).contains(&r.p)); }
            if let Ok(r) = sign_test_one_sided(&x, &y, alt) { prop_assert!((0.0..=1.0).contains(&r.p)); }
        }
        if let Ok(r) = linreg_slope_test(&x, &y) { prop_assert!((0.0..=1.0).contains(&r.p)); }
    }
}

/// Textbook two-pass Pearson correlation.
fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn mpcc_is_mean_of_joint_correlations_and_ignores_joint_order() {
    let (rows, joints) = (60, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let actual: Vec<f64> = (0..rows * joints).map(|_| rng.random_range(0.0..1.0)).collect();
    let estimate: Vec<f64> = actual.iter().map(|v| v + rng.random_range(-0.3..0.3)).collect();
    let model = KinematicModel::default();
    let pose = forward_kinematics(&model, &JointAngles::rest(&model)).unwrap();
    let poses = vec![pose; rows];

    let scores =
        score_trial(&Frames::from_vec(joints, actual.clone()), &Frames::from_vec(joints, estimate.clone()), &poses, &poses)
            .unwrap();
    let column = |data: &[f64], j: usize| (0..rows).map(|t| data[t * joints + j]).collect::<Vec<_>>();
    let oracle: Vec<f64> = (0..joints).map(|j| pearson(&column(&actual, j), &column(&estimate, j))).collect();
    for (got, want) in scores.pcc_per_joint.iter().zip(&oracle) {
        assert!((got - want).abs() < 1e-12);
    }
    assert!((scores.mpcc.mean - oracle.iter().sum::<f64>() / joints as f64).abs() < 1e-12);

    let perm = [3, 0, 5, 1, 4, 2];
    let permute = |data: &[f64]| -> Vec<f64> {
        (0..rows).flat_map(|t| perm.iter().map(move |&j| data[t * joints + j])).collect()
    };
    let shuffled =
        score_trial(&Frames::from_vec(joints, permute(&actual)), &Frames::from_vec(joints, permute(&estimate)), &poses, &poses)
            .unwrap();
    assert!((shuffled.mpcc.mean - scores.mpcc.mean).abs() < 1e-12);
    for (k, &j) in perm.iter().enumerate() {
        assert_eq!(shuffled.pcc_per_joint[k], scores.pcc_per_joint[j]);
    }
    assert_eq!(scores.md.mean, 0.0);
}
