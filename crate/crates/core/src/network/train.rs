use ndarray::{s, Array2, Zip};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::layers::{Dense, SubNetwork};
use super::RpcNet;
use crate::error::{Error, Result};
use crate::kinematics::NUM_DOFS;
use crate::signal::{make_training_windows_with, ProcessedAngles, ProcessedEmg, TrainingWindows};

/// Optimiser and schedule. The defaults are the reference training regime;
/// change them only on purpose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub epsilon: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Seeds the window shuffling.
    pub seed: u64,
    /// Visit only this many windows per epoch (the first ones of each
    /// shuffled order). Meant for smoke runs; `None` visits all of them.
    pub max_windows_per_epoch: Option<usize>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-5, epsilon: 1e-3, beta1: 0.9, beta2: 0.99, batch_size: 10, epochs: 3, seed: 0, max_windows_per_epoch: None }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.epsilon > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.batch_size > 0
            && self.epochs > 0
            && self.max_windows_per_epoch != Some(0);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid training configuration {self:?}")))
        }
    }
}

/// First and second moment estimates for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Dense>,
    pub v: Vec<Dense>,
    pub step: u64,
}

impl AdamState {
    pub fn new(net: &SubNetwork) -> Self {
        let zeros = || net.layers.iter().map(|l| Dense::zeros(l.inputs(), l.outputs())).collect();
        Self { m: zeros(), v: zeros(), step: 0 }
    }
}

/// One Adam update with bias correction, in the form
/// `p -= lr * m_hat / (sqrt(v_hat) + eps)`.
pub fn adam_step(params: &mut [Dense], grads: &[Dense], state: &mut AdamState, cfg: &TrainingConfig) {
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let (b1, b2, lr, eps) = (cfg.beta1, cfg.beta2, cfg.learning_rate, cfg.epsilon);
    let update = |p: &mut f64, g: &f64, m: &mut f64, v: &mut f64| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
    };
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        Zip::from(&mut p.weights).and(&g.weights).and(&mut m.weights).and(&mut v.weights).for_each(update);
        Zip::from(&mut p.bias).and(&g.bias).and(&mut m.bias).and(&mut v.bias).for_each(update);
    }
}

/// Inputs and targets of one mini-batch, one row per window.
#[derive(Debug, Clone)]
pub struct Batch {
    pub emg: Array2<f64>,
    pub angles: Array2<f64>,
    pub targets: Array2<f64>,
}

impl Batch {
    /// Gathers windows `(trial, index)` from teacher-forced trial windows.
    pub fn gather(trials: &[TrainingWindows<'_>], picks: &[(usize, usize)]) -> Self {
        let layout = trials[0].layout;
        let mut emg = Array2::zeros((picks.len(), layout.emg_input_size()));
        let mut angles = Array2::zeros((picks.len(), layout.angle_input_size()));
        let mut targets = Array2::zeros((picks.len(), NUM_DOFS));
        for (row, &(trial, i)) in picks.iter().enumerate() {
            let w = &trials[trial];
            w.emg_input_into(i, emg.row_mut(row).as_slice_mut().unwrap());
            w.angle_input_into(i, angles.row_mut(row).as_slice_mut().unwrap());
            targets.row_mut(row).as_slice_mut().unwrap().copy_from_slice(w.target(i));
        }
        Self { emg, angles, targets }
    }

    pub fn len(&self) -> usize {
        self.targets.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Mean squared error and one Adam step for a single network. Returns the
/// pre-update loss.
fn step_network(net: &mut SubNetwork, state: &mut AdamState, batch: &Batch, first_output: usize, cfg: &TrainingConfig) -> Result<f64> {
    let outputs = net.config.outputs;
    let angles = net.config.has_angle_branch().then(|| batch.angles.view());
    let acts = net.forward_batch(batch.emg.view(), angles)?;
    let targets = batch.targets.slice(s![.., first_output..first_output + outputs]);
    let diff = &acts.output - &targets;
    let n = diff.len() as f64;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    if !loss.is_finite() {
        return Err(Error::Numerical(format!("training loss became {loss}")));
    }
    let grad_output = diff.mapv(|d| 2.0 * d / n);
    let grads = net.backward(batch.emg.view(), angles, &acts, grad_output.view());
    if grads.iter().any(|g| g.parameters().any(|v| !v.is_finite())) {
        return Err(Error::Numerical("non-finite gradient".into()));
    }
    adam_step(&mut net.layers, &grads, state, cfg);
    Ok(loss)
}

/// Optimiser state for a whole [`RpcNet`].
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: TrainingConfig,
    pub states: Vec<AdamState>,
}

impl Trainer {
    pub fn new(net: &RpcNet, config: TrainingConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, states: net.networks.iter().map(AdamState::new).collect() })
    }

    /// One update of every constituent network on `batch`; the networks are
    /// independent and are updated in parallel. Returns the mean loss over
    /// all 24 outputs.
    pub fn step(&mut self, net: &mut RpcNet, batch: &Batch) -> Result<f64> {
        let cfg = self.config;
        let losses: Vec<Result<f64>> = net
            .networks
            .par_iter_mut()
            .zip(self.states.par_iter_mut())
            .enumerate()
            .map(|(k, (sub, state))| step_network(sub, state, batch, k * sub.config.outputs, &cfg))
            .collect();
        let mut total = 0.0;
        for l in losses {
            total += l?;
        }
        Ok(total / net.networks.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    /// Mean batch loss of each epoch.
    pub epoch_loss: Vec<f64>,
    /// Every batch loss, in order.
    pub batch_loss: Vec<f64>,
    pub windows: usize,
}

/// Teacher-forced training: angle inputs always come from the recorded
/// trajectories. Each epoch visits every window of every trial once in a
/// seeded random order, unless capped by `max_windows_per_epoch`.
pub fn train(net: &mut RpcNet, trials: &[(&ProcessedEmg, &ProcessedAngles)], cfg: &TrainingConfig) -> Result<TrainingReport> {
    train_with_progress(net, trials, cfg, |_, _| {})
}

/// As [`train`], calling `progress(done, total)` after every batch.
pub fn train_with_progress(
    net: &mut RpcNet,
    trials: &[(&ProcessedEmg, &ProcessedAngles)],
    cfg: &TrainingConfig,
    mut progress: impl FnMut(usize, usize),
) -> Result<TrainingReport> {
    if trials.is_empty() {
        return Err(Error::InvalidInput("no training trials".into()));
    }
    net.check_consistent()?;
    let layout = net.layout.clone();
    let windows: Vec<TrainingWindows<'_>> =
        trials.iter().map(|(e, a)| make_training_windows_with(e, a, &layout)).collect::<Result<_>>()?;
    let mut order: Vec<(usize, usize)> =
        windows.iter().enumerate().flat_map(|(t, w)| (0..w.len()).map(move |i| (t, i))).collect();
    if order.is_empty() {
        return Err(Error::InvalidInput("training trials contain no windows".into()));
    }
    let mut trainer = Trainer::new(net, *cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let per_epoch = cfg.max_windows_per_epoch.map_or(order.len(), |m| m.min(order.len()));
    let batches_per_epoch = per_epoch.div_ceil(cfg.batch_size);
    let total = batches_per_epoch * cfg.epochs;
    let mut report = TrainingReport { epoch_loss: Vec::new(), batch_loss: Vec::new(), windows: order.len() };
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for (b, picks) in order[..per_epoch].chunks(cfg.batch_size).enumerate() {
            let batch = Batch::gather(&windows, picks);
            let loss = trainer.step(net, &batch)?;
            sum += loss;
            report.batch_loss.push(loss);
            progress(epoch * batches_per_epoch + b + 1, total);
        }
        report.epoch_loss.push(sum / batches_per_epoch as f64);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::SubNetworkConfig;
    use approx::assert_abs_diff_eq;

    #[test]
    fn first_adam_step_closed_form() {
        // With fresh state the bias-corrected moments are g and g^2, so the
        // step is lr * g / (|g| + eps).
        let cfg = TrainingConfig::default();
        let mut params = vec![Dense::zeros(2, 1)];
        params[0].weights[[0, 0]] = 0.3;
        let mut grads = vec![Dense::zeros(2, 1)];
        grads[0].weights[[0, 0]] = 2e-3;
        grads[0].weights[[0, 1]] = -0.5;
        grads[0].bias[0] = 1e-6;
        let mut state = AdamState { m: vec![Dense::zeros(2, 1)], v: vec![Dense::zeros(2, 1)], step: 0 };
        adam_step(&mut params, &grads, &mut state, &cfg);
        let expect = |g: f64| -cfg.learning_rate * g / (g.abs() + cfg.epsilon);
        assert_abs_diff_eq!(params[0].weights[[0, 0]], 0.3 + expect(2e-3), epsilon = 1e-18);
        assert_abs_diff_eq!(params[0].weights[[0, 1]], expect(-0.5), epsilon = 1e-18);
        assert_abs_diff_eq!(params[0].bias[0], expect(1e-6), epsilon = 1e-20);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let cfg = TrainingConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = SubNetwork::new(SubNetworkConfig::from_inputs(9, 6, 1), &mut rng).unwrap();
        let mut params = net.layers.clone();
        let grads: Vec<Dense> = params.iter().map(|l| Dense::zeros(l.inputs(), l.outputs())).collect();
        let mut state = AdamState::new(&net);
        adam_step(&mut params, &grads, &mut state, &cfg);
        assert_eq!(params, net.layers);
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = TrainingConfig { batch_size: 0, ..TrainingConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
