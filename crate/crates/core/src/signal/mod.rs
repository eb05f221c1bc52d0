//! Signal processing between the raw recordings and the network: EMG
//! envelope extraction, marker-to-angle post-processing and the layout of
//! the network's input windows.

mod emg;
pub mod filter;
mod position;
mod windows;

pub use emg::{emg_postprocess, RawEmgRecording};
pub use position::{position_postprocess, resample_poses, PositionQuality};
pub use windows::{make_training_windows, make_training_windows_with, TrainingWindows, Window, WindowLayout, HISTORY};

use serde::{Deserialize, Serialize};

pub const EMG_SAMPLE_RATE_HZ: f64 = 2048.0;
pub const EMG_GAIN: f64 = 192.0;
pub const EMG_DYNAMIC_RANGE_V: f64 = 2.4;
pub const EMG_ADC_BITS: u32 = 16;
pub const EMG_CHANNELS: usize = 96;
pub const GRID_ROWS: usize = 6;
pub const GRID_COLUMNS: usize = 16;
pub const MARKER_RATE_HZ: f64 = 100.0;

/// Post-processing constants. The defaults are the acquisition protocol's
/// values and should only be overridden deliberately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// RMS window length in EMG samples.
    pub window_len: usize,
    /// RMS hop in EMG samples.
    pub window_step: usize,
    /// Rectified EMG is divided by this voltage.
    pub emg_full_scale_v: f64,
    /// Normalised angle = (angle - rest + offset) / span.
    pub angle_offset_deg: f64,
    pub angle_span_deg: f64,
    /// Moving-average length applied to marker coordinates.
    pub moving_average_order: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window_len: 200,
            window_step: 25,
            emg_full_scale_v: 5e-3,
            angle_offset_deg: 150.0,
            angle_span_deg: 240.0,
            moving_average_order: 20,
        }
    }
}

impl PipelineConfig {
    /// Number of envelope samples produced from `samples` EMG samples.
    pub fn envelope_len(&self, samples: usize) -> Option<usize> {
        (samples >= self.window_len).then(|| (samples - self.window_len) / self.window_step + 1)
    }

    pub fn normalize_angle(&self, angle: f64, rest: f64) -> f64 {
        (angle - rest + self.angle_offset_deg) / self.angle_span_deg
    }

    pub fn denormalize_angle(&self, value: f64, rest: f64) -> f64 {
        value * self.angle_span_deg - self.angle_offset_deg + rest
    }
}

/// Sample clock shared by an envelope and the angle trajectories aligned to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub len: usize,
    pub source_rate_hz: f64,
    pub window_len: usize,
    pub window_step: usize,
    /// Length of the EMG recording the envelope was computed from.
    pub source_samples: usize,
}

impl Timeline {
    pub fn rate_hz(&self) -> f64 {
        self.source_rate_hz / self.window_step as f64
    }

    /// Envelope sample `i` is stamped at the causal end of its RMS window.
    pub fn timestamp(&self, i: usize) -> f64 {
        (i * self.window_step + self.window_len) as f64 / self.source_rate_hz
    }

    pub fn timestamps(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.timestamp(i)).collect()
    }

    pub fn source_duration_s(&self) -> f64 {
        self.source_samples as f64 / self.source_rate_hz
    }
}

/// Row-major block of equally wide samples (one row per time step).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frames {
    width: usize,
    data: Vec<f64>,
}

impl Frames {
    pub fn new(width: usize) -> Self {
        Self { width, data: Vec::new() }
    }

    pub fn from_vec(width: usize, data: Vec<f64>) -> Self {
        assert!(width > 0 && data.len() % width == 0, "data length must be a multiple of the width");
        Self { width, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.width
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.width..(t + 1) * self.width]
    }

    pub fn row_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.data[t * self.width..(t + 1) * self.width]
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.width);
        self.data.extend_from_slice(row);
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(self.width).copied().collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// RMS envelope of all channels, values nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessedEmg {
    pub envelope: Frames,
    pub timeline: Timeline,
    /// Envelope values above 1 (EMG beyond the full-scale voltage). They are
    /// kept as is.
    pub saturated: usize,
}

impl ProcessedEmg {
    pub fn len(&self) -> usize {
        self.envelope.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envelope.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.envelope.width()
    }
}

/// Normalised joint-angle trajectories on an envelope timeline.
///
/// `offset` is the envelope index of the first row; it is 0 for recorded
/// trajectories and [`HISTORY`] for closed-loop estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessedAngles {
    pub angles: Frames,
    pub timeline: Timeline,
    pub offset: usize,
}

impl ProcessedAngles {
    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn timestamp(&self, k: usize) -> f64 {
        self.timeline.timestamp(self.offset + k)
    }
}
