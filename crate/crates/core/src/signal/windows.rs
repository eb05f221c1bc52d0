use serde::{Deserialize, Serialize};

use super::{Frames, ProcessedAngles, ProcessedEmg, EMG_CHANNELS};
use crate::error::{Error, Result};
use crate::kinematics::NUM_DOFS;

/// Envelope samples preceding the first estimable index (0.78 s at the
/// envelope rate). No window starts before it, whatever the input lengths.
pub const HISTORY: usize = 64;

/// Which past samples and channels feed the two network branches.
///
/// For a target at envelope index `t`, the EMG input holds samples
/// `t - emg_stride * emg_samples, ..., t - emg_stride` of the selected
/// channels, sample-major; the angle input likewise with the angle stride.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowLayout {
    pub emg_samples: usize,
    pub emg_stride: usize,
    pub angle_samples: usize,
    pub angle_stride: usize,
    /// Indices into the 96 recorded EMG channels.
    pub channels: Vec<usize>,
}

impl Default for WindowLayout {
    fn default() -> Self {
        Self { emg_samples: 16, emg_stride: 4, angle_samples: 8, angle_stride: 8, channels: (0..EMG_CHANNELS).collect() }
    }
}

impl WindowLayout {
    pub fn emg_input_size(&self) -> usize {
        self.emg_samples * self.channels.len()
    }

    pub fn angle_input_size(&self) -> usize {
        self.angle_samples * NUM_DOFS
    }

    /// Number of samples retained for a signal length in seconds at the
    /// envelope rate `rate_hz` and the given stride.
    pub fn samples_for_length(length_s: f64, rate_hz: f64, stride: usize) -> usize {
        (length_s * rate_hz / stride as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.emg_stride == 0 || self.angle_stride == 0 {
            return Err(Error::Config("window strides must be positive".into()));
        }
        if self.emg_samples == 0 || self.channels.is_empty() {
            return Err(Error::Config("the EMG input needs at least one sample and one channel".into()));
        }
        if self.emg_samples * self.emg_stride > HISTORY || self.angle_samples * self.angle_stride > HISTORY {
            return Err(Error::Config(format!("input windows may not reach back beyond {HISTORY} samples")));
        }
        if let Some(c) = self.channels.iter().find(|&&c| c >= EMG_CHANNELS) {
            return Err(Error::Config(format!("channel {c} out of range")));
        }
        Ok(())
    }

    pub fn emg_indices(&self, t: usize) -> impl Iterator<Item = usize> + '_ {
        let start = t - self.emg_stride * self.emg_samples;
        (0..self.emg_samples).map(move |k| start + k * self.emg_stride)
    }

    pub fn angle_indices(&self, t: usize) -> impl Iterator<Item = usize> + '_ {
        let start = t - self.angle_stride * self.angle_samples;
        (0..self.angle_samples).map(move |k| start + k * self.angle_stride)
    }

    /// Writes the EMG input for target index `t` into `out`.
    pub fn gather_emg(&self, envelope: &Frames, t: usize, out: &mut [f64]) {
        let width = self.channels.len();
        for (k, s) in self.emg_indices(t).enumerate() {
            let row = envelope.row(s);
            for (c, &ch) in self.channels.iter().enumerate() {
                out[k * width + c] = row[ch];
            }
        }
    }

    /// Writes the angle input for target index `t` into `out`; `row(s)` must
    /// return the 24 normalised angles at envelope index `s`.
    pub fn gather_angles<'a>(&self, row: impl Fn(usize) -> &'a [f64], t: usize, out: &mut [f64]) {
        for (k, s) in self.angle_indices(t).enumerate() {
            out[k * NUM_DOFS..(k + 1) * NUM_DOFS].copy_from_slice(row(s));
        }
    }
}

/// One supervised example.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub emg_input: Vec<f64>,
    pub angle_input: Vec<f64>,
    pub target: Vec<f64>,
}

/// Lazy view of every training window of one trial. Window `i` predicts
/// envelope index `HISTORY + i`.
#[derive(Debug, Clone, Copy)]
pub struct TrainingWindows<'a> {
    pub emg: &'a ProcessedEmg,
    pub angles: &'a ProcessedAngles,
    pub layout: &'a WindowLayout,
}

impl<'a> TrainingWindows<'a> {
    pub fn len(&self) -> usize {
        self.emg.len() - HISTORY
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn target_index(&self, i: usize) -> usize {
        HISTORY + i
    }

    pub fn emg_input_into(&self, i: usize, out: &mut [f64]) {
        self.layout.gather_emg(&self.emg.envelope, self.target_index(i), out);
    }

    pub fn angle_input_into(&self, i: usize, out: &mut [f64]) {
        let frames = &self.angles.angles;
        self.layout.gather_angles(|s| frames.row(s), self.target_index(i), out);
    }

    pub fn target(&self, i: usize) -> &'a [f64] {
        self.angles.angles.row(self.target_index(i))
    }

    pub fn window(&self, i: usize) -> Window {
        let mut emg_input = vec![0.0; self.layout.emg_input_size()];
        let mut angle_input = vec![0.0; self.layout.angle_input_size()];
        self.emg_input_into(i, &mut emg_input);
        self.angle_input_into(i, &mut angle_input);
        Window { emg_input, angle_input, target: self.target(i).to_vec() }
    }

    pub fn iter(&self) -> impl Iterator<Item = Window> + '_ {
        (0..self.len()).map(|i| self.window(i))
    }
}

/// Windows with the default layout (16 EMG samples at stride 4 over all 96
/// channels, 8 angle samples at stride 8).
pub fn make_training_windows<'a>(emg: &'a ProcessedEmg, angles: &'a ProcessedAngles) -> Result<TrainingWindows<'a>> {
    static DEFAULT: std::sync::OnceLock<WindowLayout> = std::sync::OnceLock::new();
    make_training_windows_with(emg, angles, DEFAULT.get_or_init(WindowLayout::default))
}

pub fn make_training_windows_with<'a>(
    emg: &'a ProcessedEmg,
    angles: &'a ProcessedAngles,
    layout: &'a WindowLayout,
) -> Result<TrainingWindows<'a>> {
    layout.validate()?;
    if emg.len() != angles.len() || angles.offset != 0 {
        return Err(Error::Alignment(format!(
            "EMG has {} samples, angles have {} (offset {})",
            emg.len(),
            angles.len(),
            angles.offset
        )));
    }
    if emg.channels() != EMG_CHANNELS || angles.angles.width() != NUM_DOFS {
        return Err(Error::Contract(format!(
            "expected {EMG_CHANNELS} EMG channels and {NUM_DOFS} angles, got {} and {}",
            emg.channels(),
            angles.angles.width()
        )));
    }
    if emg.len() <= HISTORY {
        return Err(Error::InputTooShort { needed: HISTORY + 1, got: emg.len() });
    }
    Ok(TrainingWindows { emg, angles, layout })
}
