use std::io::Write;

use super::processed::ProcessedTrial;
use super::trial::TrialRecord;
use crate::error::{Error, Result};
use crate::kinematics::DOF_TABLE;
use crate::signal::{Frames, Timeline};

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidInput(format!("CSV: {other:?}")),
    }
}

/// Raw EMG in input-referred volts, one row per sample.
pub fn write_emg_csv(trial: &TrialRecord, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let raw = &trial.raw_emg;
    let mut header = vec!["time_s".to_string()];
    header.extend((0..raw.channels()).map(|c| format!("ch{c}")));
    w.write_record(&header).map_err(csv_error)?;
    let scale = raw.volts_per_code();
    let mut row = Vec::with_capacity(raw.channels() + 1);
    for i in 0..raw.samples() {
        row.clear();
        row.push(format!("{}", i as f64 / raw.sample_rate_hz));
        row.extend(raw.codes.iter().map(|ch| format!("{:e}", f64::from(ch[i]) * scale)));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Marker stream in millimetres; missing markers have empty coordinates.
pub fn write_markers_csv(trial: &TrialRecord, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let slots = trial.markers.first().map_or(0, |p| p.markers.len());
    let mut header = vec!["time_s".to_string()];
    for m in 0..slots {
        header.extend(["x", "y", "z"].iter().map(|a| format!("m{m}_{a}")));
    }
    w.write_record(&header).map_err(csv_error)?;
    for (k, pose) in trial.markers.iter().enumerate() {
        let mut row = vec![format!("{}", k as f64 / trial.marker_rate_hz)];
        for (p, &valid) in pose.markers.iter().zip(&pose.valid) {
            if valid {
                row.extend([p.x, p.y, p.z].iter().map(|v| v.to_string()));
            } else {
                row.extend(std::iter::repeat_n(String::new(), 3));
            }
        }
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn write_frames(frames: &Frames, timeline: &Timeline, offset: usize, names: &[String], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["time_s".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header).map_err(csv_error)?;
    for t in 0..frames.len() {
        let mut row = vec![timeline.timestamp(offset + t).to_string()];
        row.extend(frames.row(t).iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Envelope on its timeline, one column per channel.
pub fn write_envelope_csv(trial: &ProcessedTrial, out: impl Write) -> Result<()> {
    let names: Vec<String> = (0..trial.emg.channels()).map(|c| format!("ch{c}")).collect();
    write_frames(&trial.emg.envelope, &trial.emg.timeline, 0, &names, out)
}

/// Normalised angles with joint names as column headers.
pub fn write_angles_csv(frames: &Frames, timeline: &Timeline, offset: usize, out: impl Write) -> Result<()> {
    let names: Vec<String> = DOF_TABLE.iter().map(|d| d.name()).collect();
    if frames.width() != names.len() {
        return Err(Error::Contract(format!("expected {} joint columns, got {}", names.len(), frames.width())));
    }
    write_frames(frames, timeline, offset, &names, out)
}
