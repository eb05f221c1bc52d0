use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::container::{decode, encode, read_file, write_file, PayloadReader, PayloadWriter, TRIAL_MAGIC};
use crate::error::{Error, Result};
use crate::kinematics::{HandPose3D, NUM_MARKERS};
use crate::signal::{RawEmgRecording, EMG_CHANNELS, GRID_COLUMNS, GRID_ROWS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Test,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Train => "train",
            Role::Test => "test",
        })
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Role::Train),
            "test" => Ok(Role::Test),
            other => Err(Error::InvalidInput(format!("unknown trial role {other:?}"))),
        }
    }
}

/// Electrode grid: channel `(row - 1) * columns + (column - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub rows: usize,
    pub columns: usize,
    /// Inter-electrode distance along rows and along columns.
    pub pitch_mm: [f64; 2],
}

impl Default for GridGeometry {
    fn default() -> Self {
        Self { rows: GRID_ROWS, columns: GRID_COLUMNS, pitch_mm: [10.0, 15.0] }
    }
}

/// Pose prompts shown to the subject during a trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PromptSchedule {
    pub prompts: usize,
    pub cadence_s: f64,
}

impl Default for PromptSchedule {
    fn default() -> Self {
        Self { prompts: 54, cadence_s: 8.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrialMetadata {
    pub grid: GridGeometry,
    pub prompts: PromptSchedule,
    /// Free-form provenance (generator settings, importer name, ...).
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
}

/// One recording session: raw EMG plus the marker stream captured with it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub subject_id: String,
    pub trial_id: String,
    pub role: Role,
    pub raw_emg: RawEmgRecording,
    pub markers: Vec<HandPose3D>,
    pub marker_rate_hz: f64,
    pub metadata: TrialMetadata,
}

impl TrialRecord {
    pub fn markers_duration_s(&self) -> f64 {
        self.markers.len() as f64 / self.marker_rate_hz
    }

    /// Checks every invariant a trial must satisfy before it enters the
    /// pipeline. Both loaded and generated trials go through here.
    pub fn validate(&self) -> Result<()> {
        if self.raw_emg.channels() != EMG_CHANNELS {
            return Err(Error::ChannelCount { expected: EMG_CHANNELS, found: self.raw_emg.channels() });
        }
        self.raw_emg.validate()?;
        if !(self.marker_rate_hz > 0.0) {
            return Err(Error::InvalidInput("marker rate must be positive".into()));
        }
        for pose in &self.markers {
            pose.check()?;
        }
        let emg_s = self.raw_emg.duration_s();
        let markers_s = self.markers_duration_s();
        let tolerance = (1.0 / self.marker_rate_hz).max(1.0 / self.raw_emg.sample_rate_hz);
        if (emg_s - markers_s).abs() > tolerance + 1e-9 {
            return Err(Error::DurationMismatch { emg_s, markers_s });
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.raw_emg.validate()?;
        let header = TrialHeader {
            subject_id: self.subject_id.clone(),
            trial_id: self.trial_id.clone(),
            role: self.role,
            channels: self.raw_emg.channels(),
            samples: self.raw_emg.samples(),
            sample_rate_hz: self.raw_emg.sample_rate_hz,
            gain: self.raw_emg.gain,
            dynamic_range_v: self.raw_emg.dynamic_range_v,
            marker_frames: self.markers.len(),
            marker_slots: NUM_MARKERS,
            marker_rate_hz: self.marker_rate_hz,
            metadata: self.metadata.clone(),
        };
        let mut w = PayloadWriter::new();
        for ch in &self.raw_emg.codes {
            w.i16s(ch.iter().copied());
        }
        for pose in &self.markers {
            if pose.markers.len() != NUM_MARKERS || pose.valid.len() != NUM_MARKERS {
                return Err(Error::Contract(format!("expected {NUM_MARKERS} marker slots per frame")));
            }
            w.f64s(pose.markers.iter().flat_map(|p| [p.x, p.y, p.z]));
        }
        for pose in &self.markers {
            w.u8s(pose.valid.iter().map(|&v| u8::from(v)));
        }
        encode(TRIAL_MAGIC, &header, &w.bytes)
    }

    /// Parses and validates a trial. Structural damage is reported as
    /// [`Error::Corrupt`]; a well-formed file that breaks an invariant gets
    /// the specific error for that invariant.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (h, payload): (TrialHeader, _) = decode(TRIAL_MAGIC, bytes)?;
        if h.marker_slots != NUM_MARKERS {
            return Err(Error::Corrupt(format!("{} marker slots per frame, expected {NUM_MARKERS}", h.marker_slots)));
        }
        let expected = h
            .channels
            .checked_mul(h.samples)
            .and_then(|n| n.checked_mul(2))
            .and_then(|n| n.checked_add(h.marker_frames.checked_mul(NUM_MARKERS * 25)?))
            .ok_or_else(|| Error::Corrupt("header sizes overflow".into()))?;
        if payload.len() != expected {
            return Err(Error::Corrupt(format!("payload has {} bytes, header implies {expected}", payload.len())));
        }
        let mut r = PayloadReader::new(payload);
        let mut codes = Vec::with_capacity(h.channels);
        for _ in 0..h.channels {
            codes.push(r.i16s(h.samples)?);
        }
        let coords = r.f64s(h.marker_frames * NUM_MARKERS * 3)?;
        let flags = r.u8s(h.marker_frames * NUM_MARKERS)?;
        r.finish()?;
        let markers = (0..h.marker_frames)
            .map(|k| {
                let c = &coords[k * NUM_MARKERS * 3..(k + 1) * NUM_MARKERS * 3];
                let valid = flags[k * NUM_MARKERS..(k + 1) * NUM_MARKERS].iter().map(|&b| b != 0).collect();
                HandPose3D {
                    markers: c.chunks_exact(3).map(|p| Point3::new(p[0], p[1], p[2])).collect(),
                    valid,
                    timestamp: k as f64 / h.marker_rate_hz,
                }
            })
            .collect();
        let record = TrialRecord {
            subject_id: h.subject_id,
            trial_id: h.trial_id,
            role: h.role,
            raw_emg: RawEmgRecording {
                codes,
                sample_rate_hz: h.sample_rate_hz,
                gain: h.gain,
                dynamic_range_v: h.dynamic_range_v,
            },
            markers,
            marker_rate_hz: h.marker_rate_hz,
            metadata: h.metadata,
        };
        record.validate()?;
        Ok(record)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TrialHeader {
    subject_id: String,
    trial_id: String,
    role: Role,
    channels: usize,
    samples: usize,
    sample_rate_hz: f64,
    gain: f64,
    dynamic_range_v: f64,
    marker_frames: usize,
    marker_slots: usize,
    marker_rate_hz: f64,
    metadata: TrialMetadata,
}

/// Conventional extension for trial containers.
pub const TRIAL_EXTENSION: &str = "rpct";

pub fn save_trial(path: &Path, trial: &TrialRecord) -> Result<()> {
    write_file(path, &trial.to_bytes()?)
}

pub fn load_trial(path: &Path) -> Result<TrialRecord> {
    TrialRecord::from_bytes(&read_file(path)?).map_err(|e| e.context(path.display().to_string()))
}

/// Adapter for external recording layouts. An implementation turns one
/// session of a foreign archive into a [`TrialRecord`]; the result is
/// validated like any other trial.
pub trait TrialImporter {
    /// Short name recorded in the trial metadata.
    fn name(&self) -> &str;

    /// Trials found under `root`, as `(subject, trial)` identifiers.
    fn list(&self, root: &Path) -> Result<Vec<(String, String)>>;

    fn import(&self, root: &Path, subject_id: &str, trial_id: &str) -> Result<TrialRecord>;
}

/// Runs an importer over a whole archive, validating and tagging each trial.
pub fn import_all(importer: &dyn TrialImporter, root: &Path) -> Result<Vec<TrialRecord>> {
    importer
        .list(root)?
        .into_iter()
        .map(|(subject, trial)| {
            let mut record = importer.import(root, &subject, &trial)?;
            record.metadata.notes.insert("importer".into(), importer.name().into());
            record.validate()?;
            Ok(record)
        })
        .collect()
}
