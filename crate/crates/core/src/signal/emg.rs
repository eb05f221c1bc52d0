use rayon::prelude::*;

use super::{Frames, PipelineConfig, ProcessedEmg, Timeline, EMG_ADC_BITS, EMG_DYNAMIC_RANGE_V, EMG_GAIN, EMG_SAMPLE_RATE_HZ};
use crate::error::{Error, Result};

/// Raw amplifier output: one vector of ADC codes per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct RawEmgRecording {
    pub codes: Vec<Vec<i16>>,
    pub sample_rate_hz: f64,
    pub gain: f64,
    pub dynamic_range_v: f64,
}

impl RawEmgRecording {
    pub fn new(codes: Vec<Vec<i16>>) -> Self {
        Self { codes, sample_rate_hz: EMG_SAMPLE_RATE_HZ, gain: EMG_GAIN, dynamic_range_v: EMG_DYNAMIC_RANGE_V }
    }

    pub fn channels(&self) -> usize {
        self.codes.len()
    }

    pub fn samples(&self) -> usize {
        self.codes.first().map_or(0, Vec::len)
    }

    pub fn duration_s(&self) -> f64 {
        self.samples() as f64 / self.sample_rate_hz
    }

    /// Input-referred volts per ADC code.
    pub fn volts_per_code(&self) -> f64 {
        self.dynamic_range_v / f64::from(1u32 << EMG_ADC_BITS) / self.gain
    }

    /// ADC code closest to an input-referred voltage, saturating at the
    /// converter range.
    pub fn code_for_volts(&self, volts: f64) -> i16 {
        (volts / self.volts_per_code()).round().clamp(f64::from(i16::MIN), f64::from(i16::MAX)) as i16
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.samples();
        if let Some(c) = self.codes.iter().position(|ch| ch.len() != n) {
            return Err(Error::Contract(format!("channel {c} has {} samples, channel 0 has {n}", self.codes[c].len())));
        }
        if !(self.sample_rate_hz > 0.0 && self.gain > 0.0 && self.dynamic_range_v > 0.0) {
            return Err(Error::InvalidInput("sample rate, gain and dynamic range must be positive".into()));
        }
        Ok(())
    }
}

/// Envelope extraction: codes to volts, per-channel offset removal,
/// rectification, division by the full-scale voltage, then RMS over
/// `window_len` samples every `window_step` samples.
///
/// The output has `floor((n - window_len) / window_step) + 1` samples for
/// `n` input samples per channel.
pub fn emg_postprocess(raw: &RawEmgRecording, cfg: &PipelineConfig) -> Result<ProcessedEmg> {
    raw.validate()?;
    let n = raw.samples();
    let len = cfg.envelope_len(n).ok_or(Error::InputTooShort { needed: cfg.window_len, got: n })?;
    let channels = raw.channels();
    let scale = raw.volts_per_code();

    let columns: Vec<Vec<f64>> = raw
        .codes
        .par_iter()
        .map(|codes| {
            let volts: Vec<f64> = codes.iter().map(|&c| f64::from(c) * scale).collect();
            let mean = volts.iter().sum::<f64>() / n as f64;
            let normalized: Vec<f64> = volts.iter().map(|v| (v - mean).abs() / cfg.emg_full_scale_v).collect();
            (0..len)
                .map(|i| {
                    let window = &normalized[i * cfg.window_step..i * cfg.window_step + cfg.window_len];
                    (window.iter().map(|v| v * v).sum::<f64>() / cfg.window_len as f64).sqrt()
                })
                .collect()
        })
        .collect();

    let mut data = vec![0.0; len * channels];
    for (c, col) in columns.iter().enumerate() {
        for (t, v) in col.iter().enumerate() {
            data[t * channels + c] = *v;
        }
    }
    let saturated = data.iter().filter(|v| **v > 1.0).count();
    Ok(ProcessedEmg {
        envelope: Frames::from_vec(channels.max(1), data),
        timeline: Timeline {
            len,
            source_rate_hz: raw.sample_rate_hz,
            window_len: cfg.window_len,
            window_step: cfg.window_step,
            source_samples: n,
        },
        saturated,
    })
}
