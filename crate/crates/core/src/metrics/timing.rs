use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::RpcNet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceTimeReport {
    pub variant: String,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub iterations: usize,
    pub multiply_count: usize,
    pub hardware: String,
    /// Conditions the numbers are valid under.
    pub protocol: String,
}

fn hardware_descriptor() -> String {
    let cpu = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| s.lines().find(|l| l.starts_with("model name")).map(|l| l.split(':').nth(1).unwrap_or("").trim().to_string()))
        .unwrap_or_else(|| "unknown CPU".into());
    format!("{cpu} ({} {})", std::env::consts::OS, std::env::consts::ARCH)
}

/// Times `iterations` forward passes of the whole network on one fixed
/// random input, on the calling thread, after a short warm-up. Input
/// preparation, filtering and forward kinematics are not included.
pub fn measure_inference_time(net: &RpcNet, iterations: usize, seed: u64) -> Result<InferenceTimeReport> {
    if iterations == 0 {
        return Err(Error::InvalidInput("at least one timed iteration is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let emg: Vec<f64> = (0..net.layout.emg_input_size()).map(|_| rng.random_range(0.0..0.2)).collect();
    let angles: Vec<f64> = (0..net.layout.angle_input_size()).map(|_| rng.random_range(0.4..0.8)).collect();
    for _ in 0..(iterations / 10).clamp(1, 200) {
        std::hint::black_box(net.forward(&emg, &angles)?);
    }
    let mut samples = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let start = Instant::now();
        std::hint::black_box(net.forward(std::hint::black_box(&emg), &angles)?);
        samples.push(start.elapsed().as_secs_f64() * 1e3);
    }
    let n = samples.len() as f64;
    let mean_ms = samples.iter().sum::<f64>() / n;
    let std_ms = if samples.len() > 1 {
        (samples.iter().map(|s| (s - mean_ms).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(InferenceTimeReport {
        variant: net.variant.code(),
        mean_ms,
        std_ms,
        iterations,
        multiply_count: net.multiply_count(),
        hardware: hardware_descriptor(),
        protocol: "single thread, f64, forward pass only; valid on an otherwise idle machine".into(),
    })
}
