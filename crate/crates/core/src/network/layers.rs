use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fully connected layer `y = W x + b`, with `W` stored as outputs × inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { weights: Array2::zeros((outputs, inputs)), bias: Array1::zeros(outputs) }
    }

    /// Uniform in `±1/sqrt(inputs)` for weights and biases.
    pub fn uniform(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let weights = Array2::from_shape_simple_fn((outputs, inputs), || rng.random_range(-bound..bound));
        let bias = Array1::from_shape_simple_fn(outputs, || rng.random_range(-bound..bound));
        Self { weights, bias }
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// Batch rows in, batch rows out.
    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut y = x.dot(&self.weights.t());
        y += &self.bias;
        y
    }

    pub fn forward_one(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.weights.dot(&x) + &self.bias
    }

    pub fn parameters(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(self.bias.iter())
    }

    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.bias.iter_mut())
    }
}

fn relu_in_place<D: ndarray::Dimension>(a: &mut ndarray::Array<f64, D>) {
    a.mapv_inplace(|v| v.max(0.0));
}

/// Layer widths of one sub-network.
///
/// The EMG branch is `emg_input → emg_hidden → emg_hidden`, the angle branch
/// `angle_input → angle_hidden → angle_output` and the root
/// `merged → root_hidden → outputs`. An `angle_input` of 0 removes the angle
/// branch entirely.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubNetworkConfig {
    pub emg_input: usize,
    pub emg_hidden: usize,
    pub angle_input: usize,
    pub angle_hidden: usize,
    pub angle_output: usize,
    pub root_hidden: usize,
    pub outputs: usize,
}

impl Default for SubNetworkConfig {
    fn default() -> Self {
        Self::from_inputs(1536, 192, 1)
    }
}

impl SubNetworkConfig {
    /// Widths derived from the input sizes: each branch's hidden layer is a
    /// third of its input, the angle branch narrows to 24 and the root's
    /// hidden layer is a quarter of the merged width.
    pub fn from_inputs(emg_input: usize, angle_input: usize, outputs: usize) -> Self {
        let third = |n: usize| (n / 3).max(1);
        let mut cfg = Self {
            emg_input,
            emg_hidden: third(emg_input),
            angle_input,
            angle_hidden: if angle_input > 0 { third(angle_input) } else { 0 },
            angle_output: if angle_input > 0 { 24 } else { 0 },
            root_hidden: 0,
            outputs,
        };
        cfg.root_hidden = (cfg.merged_width() / 4).max(1);
        cfg
    }

    pub fn has_angle_branch(&self) -> bool {
        self.angle_input > 0
    }

    pub fn merged_width(&self) -> usize {
        self.emg_hidden + self.angle_output
    }

    /// Replaces the EMG hidden width and recomputes the root.
    pub fn with_emg_hidden(mut self, width: usize) -> Self {
        self.emg_hidden = width.max(1);
        self.root_hidden = (self.merged_width() / 4).max(1);
        self
    }

    /// Multiplies every hidden width by `factor`.
    pub fn widened(mut self, factor: usize) -> Self {
        self.emg_hidden *= factor;
        self.angle_hidden *= factor;
        self.angle_output *= factor;
        self.root_hidden *= factor;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let branch_ok = if self.has_angle_branch() {
            self.angle_hidden > 0 && self.angle_output > 0
        } else {
            self.angle_hidden == 0 && self.angle_output == 0
        };
        if self.emg_input == 0 || self.emg_hidden == 0 || self.root_hidden == 0 || self.outputs == 0 || !branch_ok {
            return Err(Error::Config(format!("inconsistent layer widths {self:?}")));
        }
        Ok(())
    }

    /// Multiplications in one forward pass (weights only).
    pub fn multiply_count(&self) -> usize {
        self.emg_input * self.emg_hidden
            + self.emg_hidden * self.emg_hidden
            + self.angle_input * self.angle_hidden
            + self.angle_hidden * self.angle_output
            + self.merged_width() * self.root_hidden
            + self.root_hidden * self.outputs
    }

    fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = vec![(self.emg_input, self.emg_hidden), (self.emg_hidden, self.emg_hidden)];
        if self.has_angle_branch() {
            shapes.push((self.angle_input, self.angle_hidden));
            shapes.push((self.angle_hidden, self.angle_output));
        }
        shapes.push((self.merged_width(), self.root_hidden));
        shapes.push((self.root_hidden, self.outputs));
        shapes
    }
}

/// Layer indices inside [`SubNetwork::layers`].
const EMG_1: usize = 0;
const EMG_2: usize = 1;

/// One two-branch regressor. Layers are stored in a flat list:
/// EMG 1, EMG 2, [angle 1, angle 2,] root 1, root 2.
#[derive(Debug, Clone, PartialEq)]
pub struct SubNetwork {
    pub config: SubNetworkConfig,
    pub layers: Vec<Dense>,
}

/// Intermediate activations of a batch, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Activations {
    emg_1: Array2<f64>,
    emg_2: Array2<f64>,
    angle_1: Option<Array2<f64>>,
    merged: Array2<f64>,
    root_1: Array2<f64>,
    pub output: Array2<f64>,
}

impl SubNetwork {
    pub fn new(config: SubNetworkConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let layers = config.layer_shapes().into_iter().map(|(i, o)| Dense::uniform(i, o, rng)).collect();
        Ok(Self { config, layers })
    }

    pub fn zeros(config: SubNetworkConfig) -> Result<Self> {
        config.validate()?;
        let layers = config.layer_shapes().into_iter().map(|(i, o)| Dense::zeros(i, o)).collect();
        Ok(Self { config, layers })
    }

    fn root_index(&self) -> usize {
        if self.config.has_angle_branch() {
            4
        } else {
            2
        }
    }

    pub fn emg_layers(&self) -> &[Dense] {
        &self.layers[EMG_1..=EMG_2]
    }

    pub fn angle_layers(&self) -> Option<&[Dense]> {
        self.config.has_angle_branch().then(|| &self.layers[2..4])
    }

    pub fn root_layers(&self) -> &[Dense] {
        &self.layers[self.root_index()..]
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(Dense::parameter_count).sum()
    }

    fn check_batch(&self, emg: &ArrayView2<f64>, angles: Option<&ArrayView2<f64>>) -> Result<()> {
        if emg.ncols() != self.config.emg_input {
            return Err(Error::Contract(format!(
                "EMG input has {} values, the network expects {}",
                emg.ncols(),
                self.config.emg_input
            )));
        }
        match (angles, self.config.has_angle_branch()) {
            (Some(a), true) if a.ncols() == self.config.angle_input && a.nrows() == emg.nrows() => Ok(()),
            (None, false) => Ok(()),
            (Some(a), false) if a.ncols() == 0 => Ok(()),
            (a, _) => Err(Error::Contract(format!(
                "angle input of width {:?} does not fit angle input size {}",
                a.map(|a| a.ncols()),
                self.config.angle_input
            ))),
        }
    }

    /// Hidden EMG features (output of the second EMG layer) for a batch.
    pub fn emg_features(&self, emg: ArrayView2<f64>) -> Array2<f64> {
        let mut h1 = self.layers[EMG_1].forward(emg);
        relu_in_place(&mut h1);
        let mut h2 = self.layers[EMG_2].forward(h1.view());
        relu_in_place(&mut h2);
        h2
    }

    /// Batched forward pass keeping every activation.
    pub fn forward_batch(&self, emg: ArrayView2<f64>, angles: Option<ArrayView2<f64>>) -> Result<Activations> {
        self.check_batch(&emg, angles.as_ref())?;
        let mut emg_1 = self.layers[EMG_1].forward(emg);
        relu_in_place(&mut emg_1);
        let mut emg_2 = self.layers[EMG_2].forward(emg_1.view());
        relu_in_place(&mut emg_2);
        let (angle_1, merged) = match (self.angle_layers(), angles) {
            (Some(layers), Some(a)) => {
                let mut a1 = layers[0].forward(a);
                relu_in_place(&mut a1);
                let mut a2 = layers[1].forward(a1.view());
                relu_in_place(&mut a2);
                let merged = ndarray::concatenate(Axis(1), &[emg_2.view(), a2.view()]).expect("equal batch sizes");
                (Some(a1), merged)
            }
            _ => (None, emg_2.clone()),
        };
        let root = self.root_layers();
        let mut root_1 = root[0].forward(merged.view());
        relu_in_place(&mut root_1);
        let output = root[1].forward(root_1.view());
        Ok(Activations { emg_1, emg_2, angle_1, merged, root_1, output })
    }

    /// Single-sample forward pass.
    pub fn forward(&self, emg: &[f64], angles: &[f64]) -> Result<Vec<f64>> {
        if emg.len() != self.config.emg_input || angles.len() != self.config.angle_input {
            return Err(Error::Contract(format!(
                "inputs of {} and {} values do not fit sizes {} and {}",
                emg.len(),
                angles.len(),
                self.config.emg_input,
                self.config.angle_input
            )));
        }
        let relu = |v: Array1<f64>| v.mapv_into(|x| x.max(0.0));
        let e = relu(self.layers[EMG_1].forward_one(ArrayView1::from(emg)));
        let e = relu(self.layers[EMG_2].forward_one(e.view()));
        let merged = match self.angle_layers() {
            Some(layers) => {
                let a = relu(layers[0].forward_one(ArrayView1::from(angles)));
                let a = relu(layers[1].forward_one(a.view()));
                ndarray::concatenate(Axis(0), &[e.view(), a.view()]).expect("1-d concatenation")
            }
            None => e,
        };
        let root = self.root_layers();
        let r = relu(root[0].forward_one(merged.view()));
        Ok(root[1].forward_one(r.view()).to_vec())
    }

    /// Root output given precomputed EMG features and one angle input.
    /// `emg_root` must be the EMG part of the first root layer applied to the
    /// features, plus that layer's bias.
    pub(crate) fn finish_from_emg(&self, emg_root: ArrayView1<f64>, angles: &[f64], out: &mut [f64]) {
        let root = self.root_layers();
        let mut pre = emg_root.to_owned();
        if let Some(layers) = self.angle_layers() {
            let a = layers[0].forward_one(ArrayView1::from(angles)).mapv_into(|x| x.max(0.0));
            let a = layers[1].forward_one(a.view()).mapv_into(|x| x.max(0.0));
            let w_angle = root[0].weights.slice(s![.., self.config.emg_hidden..]);
            pre += &w_angle.dot(&a);
        }
        pre.mapv_inplace(|x| x.max(0.0));
        let y = root[1].forward_one(pre.view());
        out.copy_from_slice(y.as_slice().expect("contiguous"));
    }

    /// EMG contribution to the first root layer (bias included) for a batch.
    pub(crate) fn emg_root_contribution(&self, emg: ArrayView2<f64>) -> Array2<f64> {
        let features = self.emg_features(emg);
        let root = &self.root_layers()[0];
        let w_emg = root.weights.slice(s![.., ..self.config.emg_hidden]);
        let mut out = features.dot(&w_emg.t());
        out += &root.bias;
        out
    }

    /// Gradients of a loss with respect to every parameter, given the
    /// derivative of the loss with respect to the outputs of the batch.
    /// The result has the same layer layout as `self`.
    pub fn backward(
        &self,
        emg: ArrayView2<f64>,
        angles: Option<ArrayView2<f64>>,
        acts: &Activations,
        grad_output: ArrayView2<f64>,
    ) -> Vec<Dense> {
        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        grads.resize_with(self.layers.len(), || Dense::zeros(0, 0));
        let root_at = self.root_index();
        let root = self.root_layers();

        let dense_grad = |g: &ArrayView2<f64>, input: &ArrayView2<f64>| Dense {
            weights: g.t().dot(input),
            bias: g.sum_axis(Axis(0)),
        };
        let through = |g: ArrayView2<f64>, layer: &Dense, activated: &Array2<f64>| {
            let mut back = g.dot(&layer.weights);
            Zip::from(&mut back).and(activated).for_each(|b, &a| {
                if a <= 0.0 {
                    *b = 0.0;
                }
            });
            back
        };

        grads[root_at + 1] = dense_grad(&grad_output, &acts.root_1.view());
        let g_root_1 = through(grad_output, &root[1], &acts.root_1);
        grads[root_at] = dense_grad(&g_root_1.view(), &acts.merged.view());
        let g_merged = g_root_1.dot(&root[0].weights);

        let w_e = self.config.emg_hidden;
        let mut g_emg_2 = g_merged.slice(s![.., ..w_e]).to_owned();
        Zip::from(&mut g_emg_2).and(&acts.emg_2).for_each(|g, &a| {
            if a <= 0.0 {
                *g = 0.0;
            }
        });
        grads[EMG_2] = dense_grad(&g_emg_2.view(), &acts.emg_1.view());
        let g_emg_1 = through(g_emg_2.view(), &self.layers[EMG_2], &acts.emg_1);
        grads[EMG_1] = dense_grad(&g_emg_1.view(), &emg);

        if let (Some(layers), Some(a), Some(a1)) = (self.angle_layers(), angles, acts.angle_1.as_ref()) {
            let a2 = acts.merged.slice(s![.., w_e..]);
            let mut g_a2 = g_merged.slice(s![.., w_e..]).to_owned();
            Zip::from(&mut g_a2).and(&a2).for_each(|g, &v| {
                if v <= 0.0 {
                    *g = 0.0;
                }
            });
            grads[3] = dense_grad(&g_a2.view(), &a1.view());
            let g_a1 = through(g_a2.view(), &layers[1], a1);
            grads[2] = dense_grad(&g_a1.view(), &a);
        }
        grads
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_widths() {
        let c = SubNetworkConfig::default();
        assert_eq!((c.emg_input, c.emg_hidden, c.angle_input, c.angle_hidden, c.angle_output), (1536, 512, 192, 64, 24));
        assert_eq!(c.merged_width(), 536);
        assert_eq!(c.root_hidden, 134);
        let b = SubNetworkConfig::from_inputs(1536, 0, 1);
        assert_eq!(b.merged_width(), 512);
        assert!(!b.has_angle_branch());
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = SubNetwork::zeros(SubNetworkConfig::from_inputs(12, 6, 1)).unwrap();
        assert_eq!(net.forward(&[0.7; 12], &[0.3; 6]).unwrap(), vec![0.0]);
    }

    #[test]
    fn hand_computed_bias_propagation() {
        // Tiny net: 3 EMG inputs, 1 hidden unit per EMG layer, no angle branch.
        let cfg = SubNetworkConfig {
            emg_input: 3,
            emg_hidden: 1,
            angle_input: 0,
            angle_hidden: 0,
            angle_output: 0,
            root_hidden: 1,
            outputs: 1,
        };
        let mut net = SubNetwork::zeros(cfg).unwrap();
        net.layers[0].bias = array![0.5];
        net.layers[1].weights = array![[2.0]];
        net.layers[1].bias = array![-0.25];
        net.layers[2].weights = array![[3.0]];
        net.layers[2].bias = array![0.1];
        net.layers[3].weights = array![[-1.0]];
        net.layers[3].bias = array![0.2];
        // relu(0.5) = 0.5; relu(2*0.5 - 0.25) = 0.75; relu(3*0.75 + 0.1) = 2.35; -2.35 + 0.2
        assert_abs_diff_eq!(net.forward(&[0.0; 3], &[]).unwrap()[0], -2.15, epsilon = 1e-15);
    }

    #[test]
    fn batch_and_single_forward_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = SubNetwork::new(SubNetworkConfig::from_inputs(30, 12, 2), &mut rng).unwrap();
        let emg = Array2::from_shape_fn((4, 30), |(i, j)| ((i * 7 + j) % 11) as f64 / 11.0);
        let ang = Array2::from_shape_fn((4, 12), |(i, j)| ((i + 3 * j) % 5) as f64 / 5.0);
        let acts = net.forward_batch(emg.view(), Some(ang.view())).unwrap();
        for i in 0..4 {
            let single = net.forward(emg.row(i).as_slice().unwrap(), ang.row(i).as_slice().unwrap()).unwrap();
            for (a, b) in single.iter().zip(acts.output.row(i)) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
            let mut split = vec![0.0; 2];
            let contribution = net.emg_root_contribution(emg.slice(s![i..i + 1, ..]));
            net.finish_from_emg(contribution.row(0), ang.row(i).as_slice().unwrap(), &mut split);
            for (a, b) in single.iter().zip(&split) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn shape_mismatch_is_contract_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = SubNetwork::new(SubNetworkConfig::from_inputs(30, 12, 1), &mut rng).unwrap();
        assert!(matches!(net.forward(&[0.0; 29], &[0.0; 12]), Err(Error::Contract(_))));
        let emg = Array2::zeros((2, 30));
        assert!(matches!(net.forward_batch(emg.view(), None), Err(Error::Contract(_))));
    }
}
