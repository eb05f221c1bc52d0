//! Synthetic trials with a known, learnable EMG-to-kinematics relation.
//!
//! Joint trajectories are sums of a few slow sinusoids around the rest
//! pose, faded in from rest over the first second. Each joint drives two
//! sources, one for each direction of motion. A source is the rectified
//! deviation from rest plus a share of the rectified velocity, smoothed by
//! a low-pass filter. Every channel mixes a few sources with nonnegative
//! weights and uses the mixture to modulate its own band-limited noise
//! carrier. White measurement noise is added last. The EMG leads the
//! movement by a fixed delay, as muscle activity does.

use std::f64::consts::TAU;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::trial::{Role, TrialMetadata, TrialRecord};
use crate::error::{Error, Result};
use crate::kinematics::{forward_kinematics, HandPose3D, JointAngles, KinematicModel, NUM_DOFS};
use crate::signal::filter::{interpolate_linear, ButterworthLowpass};
use crate::signal::{RawEmgRecording, EMG_CHANNELS, EMG_SAMPLE_RATE_HZ, MARKER_RATE_HZ};

/// Two sources per joint: positive and negative direction.
pub const SOURCES: usize = 2 * NUM_DOFS;

/// Carrier amplitude (input-referred volts RMS) of a channel whose
/// mixed activation equals 1. Also the reference for the noise level.
pub const SIGNAL_REFERENCE_V: f64 = 3e-4;

const SINUSOIDS_PER_JOINT: usize = 5;
const MIN_FREQUENCY_HZ: f64 = 0.03;
const FADE_IN_S: f64 = 1.0;
/// Largest excursion from rest, in degrees, regardless of the joint range.
const MAX_EXCURSION_DEG: f64 = 60.0;
const RANGE_MARGIN: f64 = 0.85;
const CARRIER_BAND_HZ: (f64, f64) = (20.0, 450.0);

/// Nonnegative channel-by-source weights, row-major (`EMG_CHANNELS` rows).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingMatrix {
    pub channels: usize,
    pub sources: usize,
    pub weights: Vec<f64>,
}

impl MixingMatrix {
    /// Sparse random mixing: every channel listens to `per_channel`
    /// distinct sources with weights in `[0.25, 1]`.
    pub fn random(seed: u64, per_channel: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let per_channel = per_channel.clamp(1, SOURCES);
        let mut weights = vec![0.0; EMG_CHANNELS * SOURCES];
        for c in 0..EMG_CHANNELS {
            for s in sample(&mut rng, SOURCES, per_channel) {
                weights[c * SOURCES + s] = rng.random_range(0.25..1.0);
            }
        }
        Self { channels: EMG_CHANNELS, sources: SOURCES, weights }
    }

    pub fn weight(&self, channel: usize, source: usize) -> f64 {
        self.weights[channel * self.sources + source]
    }

    fn validate(&self) -> Result<()> {
        if self.channels != EMG_CHANNELS || self.sources != SOURCES || self.weights.len() != EMG_CHANNELS * SOURCES {
            return Err(Error::Config(format!(
                "mixing matrix must be {EMG_CHANNELS}x{SOURCES}, got {}x{} with {} weights",
                self.channels,
                self.sources,
                self.weights.len()
            )));
        }
        if let Some(w) = self.weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::Config(format!("mixing weights must be finite and nonnegative, found {w}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub subject_id: String,
    pub trial_id: String,
    pub role: Role,
    pub duration_s: f64,
    /// Seed of the trajectories and of all noise.
    pub seed: u64,
    /// Highest frequency present in the joint trajectories.
    pub smoothness_hz: f64,
    /// Fraction of each joint's usable range actually visited; 0 keeps the
    /// hand at rest.
    pub motion_amplitude: f64,
    /// Weight of the velocity term relative to the position term.
    pub velocity_gain: f64,
    /// Cutoff of the low-pass applied to the sources.
    pub activation_cutoff_hz: f64,
    /// How far the EMG runs ahead of the movement.
    pub emg_lead_s: f64,
    /// Standard deviation of the additive noise, as a fraction of
    /// [`SIGNAL_REFERENCE_V`].
    pub noise_level: f64,
    /// Subject-specific, so keep it fixed across the trials of a subject.
    pub mixing: MixingMatrix,
}

impl SyntheticSpec {
    pub fn new(duration_s: f64, seed: u64, mixing: MixingMatrix) -> Self {
        Self {
            subject_id: "synthetic".into(),
            trial_id: format!("seed{seed}"),
            role: Role::Train,
            duration_s,
            seed,
            smoothness_hz: 0.4,
            motion_amplitude: 1.0,
            velocity_gain: 0.3,
            activation_cutoff_hz: 3.0,
            emg_lead_s: 0.05,
            noise_level: 0.1,
            mixing,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(Error::Config(msg.into())) };
        check(self.duration_s.is_finite() && self.duration_s >= 2.0, "synthetic duration must be at least 2 s")?;
        check(
            self.smoothness_hz > MIN_FREQUENCY_HZ && self.smoothness_hz <= 10.0,
            "trajectory bandwidth must lie in (0.03, 10] Hz",
        )?;
        check((0.0..=1.0).contains(&self.motion_amplitude), "motion amplitude must lie in [0, 1]")?;
        check(self.velocity_gain.is_finite() && self.velocity_gain >= 0.0, "velocity gain must be nonnegative")?;
        check(
            self.activation_cutoff_hz > 0.0 && self.activation_cutoff_hz < MARKER_RATE_HZ / 2.0,
            "activation cutoff must lie below the marker Nyquist frequency",
        )?;
        check((0.0..=1.0).contains(&self.emg_lead_s), "EMG lead must lie in [0, 1] s")?;
        check(self.noise_level.is_finite() && self.noise_level >= 0.0, "noise level must be nonnegative")?;
        self.mixing.validate()
    }
}

struct Trajectory {
    rest: f64,
    /// Degrees per unit of the normalised oscillation.
    span: f64,
    /// (amplitude, frequency in Hz, phase); amplitudes sum to 1.
    components: Vec<(f64, f64, f64)>,
}

fn fade(t: f64) -> (f64, f64) {
    if t >= FADE_IN_S {
        return (1.0, 0.0);
    }
    let u = (t / FADE_IN_S).max(0.0);
    (u * u * (3.0 - 2.0 * u), 6.0 * u * (1.0 - u) / FADE_IN_S)
}

impl Trajectory {
    /// Normalised deviation in `[-1, 1]` and its time derivative.
    fn unit(&self, t: f64) -> (f64, f64) {
        let (mut x, mut dx) = (0.0, 0.0);
        for &(a, f, phi) in &self.components {
            let w = TAU * f;
            x += a * (w * t + phi).sin();
            dx += a * w * (w * t + phi).cos();
        }
        let (r, dr) = fade(t);
        (r * x, dr * x + r * dx)
    }
}

fn trajectories(spec: &SyntheticSpec, model: &KinematicModel, rng: &mut ChaCha8Rng) -> Vec<Trajectory> {
    (0..NUM_DOFS)
        .map(|j| {
            let rest = model.rest_angles[j];
            let room = (rest - model.lower(j)).min(model.upper(j) - rest).clamp(0.0, MAX_EXCURSION_DEG);
            let mut components: Vec<(f64, f64, f64)> = (0..SINUSOIDS_PER_JOINT)
                .map(|_| {
                    (
                        rng.random_range(0.5..1.0),
                        rng.random_range(MIN_FREQUENCY_HZ..spec.smoothness_hz),
                        rng.random_range(0.0..TAU),
                    )
                })
                .collect();
            let total: f64 = components.iter().map(|c| c.0).sum();
            components.iter_mut().for_each(|c| c.0 /= total);
            Trajectory { rest, span: room * RANGE_MARGIN * spec.motion_amplitude, components }
        })
        .collect()
}

/// Draws one trial. The same spec and model always give the same record.
pub fn generate_synthetic_trial(spec: &SyntheticSpec, model: &KinematicModel) -> Result<TrialRecord> {
    spec.validate()?;
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let joints = trajectories(spec, model, &mut rng);

    let frames = (spec.duration_s * MARKER_RATE_HZ).round() as usize;
    let samples = (spec.duration_s * EMG_SAMPLE_RATE_HZ).round() as usize;
    let frame_times: Vec<f64> = (0..frames).map(|k| k as f64 / MARKER_RATE_HZ).collect();

    let markers: Vec<HandPose3D> = frame_times
        .par_iter()
        .map(|&t| {
            let values = joints.iter().map(|tr| tr.rest + tr.span * tr.unit(t).0).collect();
            forward_kinematics(model, &JointAngles::new(values, t))
        })
        .collect::<Result<_>>()?;

    // Sources on the marker clock, shifted by the EMG lead.
    let max_rate = TAU * spec.smoothness_hz;
    let sources: Vec<Vec<f64>> = (0..SOURCES)
        .into_par_iter()
        .map(|s| {
            let (tr, sign) = (&joints[s / 2], if s % 2 == 0 { 1.0 } else { -1.0 });
            let raw: Vec<f64> = frame_times
                .iter()
                .map(|&t| {
                    let (x, dx) = tr.unit(t + spec.emg_lead_s);
                    let x = x * spec.motion_amplitude;
                    let dx = dx * spec.motion_amplitude / max_rate;
                    (sign * x).max(0.0) + spec.velocity_gain * (sign * dx).max(0.0)
                })
                .collect();
            let mut lp = ButterworthLowpass::new(2, spec.activation_cutoff_hz, MARKER_RATE_HZ);
            lp.settle(raw[0]);
            lp.filter(&raw).into_iter().map(|v| v.max(0.0)).collect()
        })
        .collect();

    let emg_times: Vec<f64> = (0..samples).map(|i| i as f64 / EMG_SAMPLE_RATE_HZ).collect();
    let template = RawEmgRecording::new(Vec::new());
    let codes: Vec<Vec<i16>> = (0..EMG_CHANNELS)
        .into_par_iter()
        .map(|c| {
            let mut drive = vec![0.0; frames];
            for (s, src) in sources.iter().enumerate() {
                let w = spec.mixing.weight(c, s);
                if w > 0.0 {
                    drive.iter_mut().zip(src).for_each(|(d, v)| *d += w * v);
                }
            }
            let envelope = interpolate_linear(&frame_times, &drive, &emg_times);

            let mut crng = ChaCha8Rng::seed_from_u64(spec.seed);
            crng.set_stream(1 + c as u64);
            let carrier = band_limited_noise(&mut crng, samples);
            envelope
                .iter()
                .zip(&carrier)
                .map(|(a, n)| {
                    let noise: f64 = StandardNormal.sample(&mut crng);
                    let volts = SIGNAL_REFERENCE_V * (a * n + spec.noise_level * noise);
                    template.code_for_volts(volts)
                })
                .collect()
        })
        .collect();

    let mut metadata = TrialMetadata::default();
    metadata.notes.insert("source".into(), "synthetic".into());
    metadata.notes.insert("seed".into(), spec.seed.to_string());
    let record = TrialRecord {
        subject_id: spec.subject_id.clone(),
        trial_id: spec.trial_id.clone(),
        role: spec.role,
        raw_emg: RawEmgRecording::new(codes),
        markers,
        marker_rate_hz: MARKER_RATE_HZ,
        metadata,
    };
    record.validate()?;
    Ok(record)
}

/// Unit-RMS noise band-limited to the surface EMG band.
fn band_limited_noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let white: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    let upper = ButterworthLowpass::new(4, CARRIER_BAND_HZ.1, EMG_SAMPLE_RATE_HZ).filter(&white);
    let lower = ButterworthLowpass::new(2, CARRIER_BAND_HZ.0, EMG_SAMPLE_RATE_HZ).filter(&upper);
    let mut band: Vec<f64> = upper.iter().zip(&lower).map(|(u, l)| u - l).collect();
    let rms = (band.iter().map(|v| v * v).sum::<f64>() / n.max(1) as f64).sqrt();
    if rms > 0.0 {
        band.iter_mut().for_each(|v| *v /= rms);
    }
    band
}

/// Joint angles (degrees) the generator used at marker frame `k`; lets
/// tests compare recovered angles with the truth.
pub fn synthetic_angles(spec: &SyntheticSpec, model: &KinematicModel) -> Result<Vec<JointAngles>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let joints = trajectories(spec, model, &mut rng);
    let frames = (spec.duration_s * MARKER_RATE_HZ).round() as usize;
    Ok((0..frames)
        .map(|k| {
            let t = k as f64 / MARKER_RATE_HZ;
            JointAngles::new(joints.iter().map(|tr| tr.rest + tr.span * tr.unit(t).0).collect(), t)
        })
        .collect())
}
