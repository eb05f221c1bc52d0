use std::path::Path;

use serde::{Deserialize, Serialize};

use super::container::{decode, encode, read_file, write_file, PayloadReader, PayloadWriter, PROCESSED_MAGIC};
use super::trial::{Role, TrialRecord};
use crate::error::{Error, Result};
use crate::kinematics::{KinematicModel, NUM_DOFS};
use crate::signal::{
    emg_postprocess, position_postprocess, Frames, PipelineConfig, PositionQuality, ProcessedAngles, ProcessedEmg,
    Timeline,
};

/// Per-trial notes from marker post-processing, kept with the processed
/// streams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessingSummary {
    pub envelope_len: usize,
    pub emg_duration_s: f64,
    pub markers_duration_s: f64,
    pub saturated_values: usize,
    pub held_frames: usize,
    pub interpolated_frames: usize,
    pub unconverged_chains: usize,
    pub mean_ik_error_mm: f64,
}

/// Envelope and angle trajectories of one trial on a common timeline.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessedTrial {
    pub subject_id: String,
    pub trial_id: String,
    pub role: Role,
    pub emg: ProcessedEmg,
    pub angles: ProcessedAngles,
    pub pipeline: PipelineConfig,
    pub summary: ProcessingSummary,
}

/// Runs both post-processing chains on a trial.
pub fn process_trial(trial: &TrialRecord, model: &KinematicModel, cfg: &PipelineConfig) -> Result<ProcessedTrial> {
    trial.validate()?;
    let emg = emg_postprocess(&trial.raw_emg, cfg)?;
    let (angles, quality): (ProcessedAngles, PositionQuality) =
        position_postprocess(&trial.markers, trial.marker_rate_hz, model, &emg.timeline, cfg)?;
    let summary = ProcessingSummary {
        envelope_len: emg.len(),
        emg_duration_s: trial.raw_emg.duration_s(),
        markers_duration_s: trial.markers_duration_s(),
        saturated_values: emg.saturated,
        held_frames: quality.held_frames.len(),
        interpolated_frames: quality.interpolated_frames.len(),
        unconverged_chains: quality.unconverged_chains,
        mean_ik_error_mm: quality.mean_ik_error_mm,
    };
    Ok(ProcessedTrial {
        subject_id: trial.subject_id.clone(),
        trial_id: trial.trial_id.clone(),
        role: trial.role,
        emg,
        angles,
        pipeline: *cfg,
        summary,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct ProcessedHeader {
    subject_id: String,
    trial_id: String,
    role: Role,
    timeline: Timeline,
    channels: usize,
    joints: usize,
    angle_offset: usize,
    pipeline: PipelineConfig,
    summary: ProcessingSummary,
}

/// Conventional extension for processed containers.
pub const PROCESSED_EXTENSION: &str = "rpcp";

impl ProcessedTrial {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if self.angles.angles.len() != self.emg.len() || self.angles.offset != 0 {
            return Err(Error::Alignment("processed angles must cover the envelope timeline from index 0".into()));
        }
        let header = ProcessedHeader {
            subject_id: self.subject_id.clone(),
            trial_id: self.trial_id.clone(),
            role: self.role,
            timeline: self.emg.timeline,
            channels: self.emg.channels(),
            joints: self.angles.angles.width(),
            angle_offset: self.angles.offset,
            pipeline: self.pipeline,
            summary: self.summary.clone(),
        };
        let mut w = PayloadWriter::new();
        w.f64s(self.emg.envelope.as_slice().iter().copied());
        w.f64s(self.angles.angles.as_slice().iter().copied());
        encode(PROCESSED_MAGIC, &header, &w.bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (h, payload): (ProcessedHeader, _) = decode(PROCESSED_MAGIC, bytes)?;
        if h.joints != NUM_DOFS || h.channels == 0 {
            return Err(Error::Corrupt(format!("{} channels and {} joints in a processed trial", h.channels, h.joints)));
        }
        let len = h.timeline.len;
        let expected = len.checked_mul((h.channels + h.joints) * 8);
        if expected != Some(payload.len()) {
            return Err(Error::Corrupt(format!("payload has {} bytes for {len} samples", payload.len())));
        }
        let mut r = PayloadReader::new(payload);
        let envelope = Frames::from_vec(h.channels, r.f64s(len * h.channels)?);
        let angles = Frames::from_vec(h.joints, r.f64s(len * h.joints)?);
        r.finish()?;
        let saturated = envelope.as_slice().iter().filter(|v| **v > 1.0).count();
        Ok(Self {
            subject_id: h.subject_id,
            trial_id: h.trial_id,
            role: h.role,
            emg: ProcessedEmg { envelope, timeline: h.timeline, saturated },
            angles: ProcessedAngles { angles, timeline: h.timeline, offset: h.angle_offset },
            pipeline: h.pipeline,
            summary: h.summary,
        })
    }
}

pub fn save_processed(path: &Path, trial: &ProcessedTrial) -> Result<()> {
    write_file(path, &trial.to_bytes()?)
}

pub fn load_processed(path: &Path) -> Result<ProcessedTrial> {
    ProcessedTrial::from_bytes(&read_file(path)?).map_err(|e| e.context(path.display().to_string()))
}
