//! The recursive per-joint regressor.
//!
//! An [`RpcNet`] holds either 24 two-branch [`SubNetwork`]s, one per joint,
//! or a single network with 24 outputs (the `I` and `W` families). Every
//! constituent network sees the same EMG window and, unless the variant
//! drops it, the same window of past joint angles.
//!
//! Computation runs in `f64`; checkpoints store parameters as `f32`.

mod checkpoint;
mod infer;
mod layers;
mod train;
mod variant;

pub use checkpoint::{checkpoint_bytes, load_checkpoint, parse_checkpoint, save_checkpoint, CheckpointHeader};
pub use infer::{infer_recursive, infer_recursive_with, smooth_and_project, HistorySeed, SmoothedEstimate};
pub use layers::{Activations, Dense, SubNetwork, SubNetworkConfig};
pub use train::{adam_step, train, train_with_progress, AdamState, Batch, Trainer, TrainingConfig, TrainingReport};
pub use variant::{electrode_channels, Family, Variant, ELECTRODE_CODES, LENGTH_GRID_S, WIDTH_CODES};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kinematics::NUM_DOFS;
use crate::signal::{Window, WindowLayout};

#[derive(Debug, Clone, PartialEq)]
pub struct RpcNet {
    pub variant: Variant,
    pub layout: WindowLayout,
    pub networks: Vec<SubNetwork>,
}

impl RpcNet {
    /// Freshly initialised network. Constituent network `k` draws its
    /// weights from stream `k` of a generator seeded with `seed`, so the
    /// initialisation does not depend on thread scheduling.
    pub fn new(variant: Variant, seed: u64) -> Result<Self> {
        let layout = variant.layout()?;
        let config = variant.network_config()?;
        let networks = (0..variant.network_count())
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k as u64);
                SubNetwork::new(config, &mut rng)
            })
            .collect::<Result<_>>()?;
        Ok(Self { variant, layout, networks })
    }

    pub fn from_code(code: &str, seed: u64) -> Result<Self> {
        Self::new(code.parse()?, seed)
    }

    pub fn config(&self) -> SubNetworkConfig {
        self.networks[0].config
    }

    pub fn has_angle_branch(&self) -> bool {
        self.config().has_angle_branch()
    }

    /// Multiplications in one full forward pass producing all 24 angles.
    pub fn multiply_count(&self) -> usize {
        self.networks.len() * self.config().multiply_count()
    }

    pub fn parameter_count(&self) -> usize {
        self.networks.iter().map(SubNetwork::parameter_count).sum()
    }

    /// All 24 normalised angles for one input window.
    pub fn forward(&self, emg: &[f64], angles: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(NUM_DOFS);
        for net in &self.networks {
            out.extend(net.forward(emg, angles)?);
        }
        Ok(out)
    }

    pub fn forward_window(&self, window: &Window) -> Result<Vec<f64>> {
        self.forward(&window.emg_input, &window.angle_input)
    }

    pub(crate) fn check_consistent(&self) -> Result<()> {
        let expected = self.variant.network_config()?;
        if self.networks.len() != self.variant.network_count()
            || self.networks.iter().any(|n| n.config != expected)
            || self.layout != self.variant.layout()?
        {
            return Err(Error::Contract(format!("network structure does not match variant {}", self.variant)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_net_shapes() {
        let net = RpcNet::from_code("full", 0).unwrap();
        assert_eq!(net.networks.len(), 24);
        assert_eq!(net.config().merged_width(), 536);
        let out = net.forward(&vec![0.1; 1536], &vec![0.625; 192]).unwrap();
        assert_eq!(out.len(), 24);
        net.check_consistent().unwrap();
    }

    #[test]
    fn seeded_initialisation() {
        let a = RpcNet::from_code("B1", 5).unwrap();
        let b = RpcNet::from_code("B1", 5).unwrap();
        let c = RpcNet::from_code("B1", 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a.networks[0], a.networks[1]);
    }

    #[test]
    fn fewer_electrodes_cost_less() {
        let full = RpcNet::from_code("full", 0).unwrap().multiply_count();
        let b1 = RpcNet::from_code("B1", 0).unwrap().multiply_count();
        assert!((b1 as f64) / (full as f64) <= 1.0 / 3.0);
        let single = RpcNet::from_code("I", 0).unwrap().multiply_count();
        assert!(single < full / 20);
    }
}
