//! Checkpoint files (magic `RPCK`).
//!
//! The JSON header records the variant code, window layout, layer widths and
//! the shape of every layer. The payload is every parameter as a
//! little-endian `f32`: networks in order, within a network the layers in
//! order (EMG 1, EMG 2, angle 1, angle 2, root 1, root 2; the angle layers
//! are absent without an angle branch), within a layer the weights
//! row-major (one row per output unit) followed by the biases.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::layers::{Dense, SubNetwork, SubNetworkConfig};
use super::{RpcNet, Variant};
use crate::data::container::{self, PayloadReader, PayloadWriter, CHECKPOINT_MAGIC};
use crate::error::{Error, Result};
use crate::signal::WindowLayout;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub variant: String,
    pub layout: WindowLayout,
    pub config: SubNetworkConfig,
    pub networks: usize,
    /// `[inputs, outputs]` of each layer of one network.
    pub layer_shapes: Vec<[usize; 2]>,
    pub parameters: usize,
    pub dtype: String,
    /// Free-form provenance (training settings, seeds, data identity).
    #[serde(default)]
    pub metadata: serde_json::Value,
}

pub fn checkpoint_bytes(net: &RpcNet, metadata: serde_json::Value) -> Result<Vec<u8>> {
    net.check_consistent()?;
    let header = CheckpointHeader {
        variant: net.variant.code(),
        layout: net.layout.clone(),
        config: net.config(),
        networks: net.networks.len(),
        layer_shapes: net.networks[0].layers.iter().map(|l| [l.inputs(), l.outputs()]).collect(),
        parameters: net.parameter_count(),
        dtype: "f32le".into(),
        metadata,
    };
    let mut payload = PayloadWriter::new();
    for sub in &net.networks {
        for layer in &sub.layers {
            payload.f32s(layer.parameters().map(|&v| v as f32));
        }
    }
    container::encode(CHECKPOINT_MAGIC, &header, &payload.bytes)
}

pub fn parse_checkpoint(bytes: &[u8]) -> Result<(RpcNet, CheckpointHeader)> {
    let (header, payload): (CheckpointHeader, _) = container::decode(CHECKPOINT_MAGIC, bytes)?;
    if header.dtype != "f32le" {
        return Err(Error::Corrupt(format!("unsupported parameter type {:?}", header.dtype)));
    }
    let variant: Variant = header.variant.parse()?;
    let config = variant.network_config()?;
    if config != header.config || variant.layout()? != header.layout || header.networks != variant.network_count() {
        return Err(Error::Corrupt(format!("header does not describe variant {}", header.variant)));
    }
    let template = SubNetwork::zeros(config)?;
    let shapes: Vec<[usize; 2]> = template.layers.iter().map(|l| [l.inputs(), l.outputs()]).collect();
    if shapes != header.layer_shapes {
        return Err(Error::Corrupt("layer shapes disagree with the variant".into()));
    }
    let mut reader = PayloadReader::new(payload);
    let mut networks = Vec::with_capacity(header.networks);
    for _ in 0..header.networks {
        let mut layers = Vec::with_capacity(shapes.len());
        for &[inputs, outputs] in &shapes {
            let w = reader.f32s(inputs * outputs)?;
            let b = reader.f32s(outputs)?;
            layers.push(Dense {
                weights: Array2::from_shape_vec((outputs, inputs), w.into_iter().map(f64::from).collect())
                    .expect("shape checked"),
                bias: Array1::from_iter(b.into_iter().map(f64::from)),
            });
        }
        networks.push(SubNetwork { config, layers });
    }
    reader.finish()?;
    let layout = header.layout.clone();
    Ok((RpcNet { variant, layout, networks }, header))
}

pub fn save_checkpoint(path: &Path, net: &RpcNet, metadata: serde_json::Value) -> Result<()> {
    container::write_file(path, &checkpoint_bytes(net, metadata)?)
}

pub fn load_checkpoint(path: &Path) -> Result<(RpcNet, CheckpointHeader)> {
    parse_checkpoint(&container::read_file(path)?).map_err(|e| e.context(path.display().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_rounds_to_f32() {
        let net = RpcNet::from_code("B+C2", 4).unwrap();
        let bytes = checkpoint_bytes(&net, serde_json::json!({"seed": 4})).unwrap();
        let (loaded, header) = parse_checkpoint(&bytes).unwrap();
        assert_eq!(header.metadata["seed"], 4);
        assert_eq!(header.layer_shapes.len(), 4);
        for (a, b) in net.networks.iter().zip(&loaded.networks) {
            for (la, lb) in a.layers.iter().zip(&b.layers) {
                for (x, y) in la.parameters().zip(lb.parameters()) {
                    assert_eq!(*x as f32 as f64, *y);
                }
            }
        }
        // Saving the loaded network reproduces the file exactly.
        assert_eq!(checkpoint_bytes(&loaded, serde_json::json!({"seed": 4})).unwrap(), bytes);
    }

    #[test]
    fn truncated_checkpoint_is_corrupt() {
        let net = RpcNet::from_code("I-B+C1", 0).unwrap();
        let bytes = checkpoint_bytes(&net, serde_json::Value::Null).unwrap();
        assert!(matches!(parse_checkpoint(&bytes[..bytes.len() - 4]), Err(Error::Corrupt(_))));
    }
}
