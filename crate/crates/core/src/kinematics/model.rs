//! The 24-DoF hand model: degree-of-freedom table, marker layout and the
//! editable per-subject parameters (segment lengths, limits, rest angles).
//!
//! Coordinates are millimetres in the forearm frame with the wrist joint
//! centre at the origin: `x` points distally along the forearm, `y` points
//! radially (towards the thumb) and `z` points dorsally. At the reference
//! pose the back of the hand (plane K) is the `z = 0` plane, parallel to the
//! forearm plane W, and the knuckle line Q is parallel to the forearm line G
//! (both along `y`).

use std::collections::BTreeMap;

use nalgebra::{Point3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_DOFS: usize = 24;
pub const NUM_HAND_MARKERS: usize = 21;
pub const NUM_MARKERS: usize = 23;
pub const NUM_PALM_MARKERS: usize = 6;

/// Marker slots. Palm markers come first, then three per digit
/// (proximal joint, distal joint, tip), then the two forearm markers.
pub const PALM_MARKERS: std::ops::Range<usize> = 0..6;
pub const FOREARM_MARKERS: std::ops::Range<usize> = 21..23;

/// DoF slots of the three wrist rotations.
pub const WRIST_DOFS: std::ops::Range<usize> = 0..3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Finger {
    Thumb,
    Index,
    Middle,
    Ring,
    Little,
}

impl Finger {
    pub const ALL: [Finger; 5] = [
        Finger::Thumb,
        Finger::Index,
        Finger::Middle,
        Finger::Ring,
        Finger::Little,
    ];
    /// The four long fingers solved by the per-finger phase.
    pub const LONG: [Finger; 4] = [Finger::Index, Finger::Middle, Finger::Ring, Finger::Little];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Finger::Thumb => "thumb",
            Finger::Index => "index",
            Finger::Middle => "middle",
            Finger::Ring => "ring",
            Finger::Little => "little",
        }
    }

    /// Marker slots of the digit: proximal joint, distal joint, tip.
    pub const fn markers(self) -> std::ops::Range<usize> {
        let start = NUM_PALM_MARKERS + 3 * self.index();
        start..start + 3
    }

    pub const fn tip_marker(self) -> usize {
        self.markers().end - 1
    }

    /// DoF slots of the digit (5 for the thumb, 4 for the others).
    pub fn dofs(self) -> std::ops::Range<usize> {
        match self {
            Finger::Thumb => 3..8,
            f => {
                let start = 8 + 4 * (f.index() - 1);
                start..start + 4
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DofKind {
    FlexionExtension,
    AdductionAbduction,
    PronationSupination,
}

impl DofKind {
    pub fn abbreviation(self) -> &'static str {
        match self {
            DofKind::FlexionExtension => "FE",
            DofKind::AdductionAbduction => "AA",
            DofKind::PronationSupination => "PS",
        }
    }
}

/// Local rotation axis of a DoF. Flexion-extension turns about `-y` so that
/// positive angles extend (move the segment dorsally); adduction-abduction
/// turns about `+z` so that positive angles deviate radially.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RotationAxis {
    PosX,
    NegY,
    PosZ,
}

impl RotationAxis {
    pub fn unit(self) -> Vector3<f64> {
        match self {
            RotationAxis::PosX => Vector3::x(),
            RotationAxis::NegY => -Vector3::y(),
            RotationAxis::PosZ => Vector3::z(),
        }
    }

    pub fn rotation(self, degrees: f64) -> Rotation3<f64> {
        Rotation3::from_scaled_axis(self.unit() * degrees.to_radians())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DofSpec {
    /// Four-letter joint code.
    pub joint: &'static str,
    pub kind: DofKind,
    pub axis: RotationAxis,
}

impl DofSpec {
    /// Stable identifier such as `INMP_FE`, used as config key and CSV header.
    pub fn name(&self) -> String {
        format!("{}_{}", self.joint, self.kind.abbreviation())
    }
}

const fn fe(joint: &'static str) -> DofSpec {
    DofSpec { joint, kind: DofKind::FlexionExtension, axis: RotationAxis::NegY }
}

const fn aa(joint: &'static str) -> DofSpec {
    DofSpec { joint, kind: DofKind::AdductionAbduction, axis: RotationAxis::PosZ }
}

/// Wrist rotations are applied intrinsically in x-y-z order:
/// `R = Rx(ps) * R(-y)(fe) * Rz(aa)`.
pub const DOF_TABLE: [DofSpec; NUM_DOFS] = [
    DofSpec { joint: "WRST", kind: DofKind::PronationSupination, axis: RotationAxis::PosX },
    fe("WRST"),
    aa("WRST"),
    fe("THMP"),
    aa("THMP"),
    fe("THIP"),
    aa("THIP"),
    fe("THID"),
    fe("INMP"),
    aa("INMP"),
    fe("INIP"),
    fe("INID"),
    fe("MIMP"),
    aa("MIMP"),
    fe("MIIP"),
    fe("MIID"),
    fe("RIMP"),
    aa("RIMP"),
    fe("RIIP"),
    fe("RIID"),
    fe("LIMP"),
    aa("LIMP"),
    fe("LIIP"),
    fe("LIID"),
];

/// Rotation DoFs per link of a digit chain, applied left to right.
/// Each link ends at one marker.
pub fn chain_links(finger: Finger) -> [&'static [usize]; 3] {
    // Offsets are relative to `finger.dofs().start`.
    match finger {
        // MP: A-A then F-E; IP: A-A then F-E; ID: F-E.
        Finger::Thumb => [&[1, 0], &[3, 2], &[4]],
        // MP: A-A then F-E; IP: F-E; ID: F-E.
        _ => [&[1, 0], &[2], &[3]],
    }
}

/// Per-joint limits and rest angle in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointRange {
    pub min: f64,
    pub max: f64,
    pub rest: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KinematicModel {
    /// Per digit (thumb first): proximal, middle and distal link lengths.
    pub segment_lengths: [[f64; 3]; 5],
    /// Reference positions of the six palm markers in the palm frame.
    pub palm_markers: [Point3<f64>; NUM_PALM_MARKERS],
    /// Proximal joint centre of each digit in the palm frame.
    pub finger_bases: [Point3<f64>; 5],
    /// Orientation of the thumb reference frame (plane T, line H) relative to
    /// the palm frame, intrinsic x-y-z in degrees.
    pub thumb_frame_deg: [f64; 3],
    pub forearm_markers: [Point3<f64>; 2],
    pub joint_limits: [[f64; 2]; NUM_DOFS],
    pub rest_angles: [f64; NUM_DOFS],
}

impl Default for KinematicModel {
    fn default() -> Self {
        let p = Point3::new;
        let mut joint_limits = [[0.0; 2]; NUM_DOFS];
        let mut rest_angles = [0.0; NUM_DOFS];
        for (i, range) in default_ranges().iter().enumerate() {
            joint_limits[i] = [range.min, range.max];
            rest_angles[i] = range.rest;
        }
        Self {
            segment_lengths: [
                [45.0, 32.0, 25.0],
                [40.0, 24.0, 21.0],
                [45.0, 28.0, 23.0],
                [42.0, 27.0, 22.0],
                [33.0, 20.0, 19.0],
            ],
            palm_markers: [
                p(10.0, 22.0, 12.0),
                p(10.0, -22.0, 12.0),
                p(45.0, 20.0, 15.0),
                p(45.0, -18.0, 15.0),
                p(80.0, 28.0, 10.0),
                p(75.0, -30.0, 10.0),
            ],
            finger_bases: [
                p(22.0, 28.0, -8.0),
                p(85.0, 25.0, 0.0),
                p(88.0, 5.0, 0.0),
                p(82.0, -14.0, 0.0),
                p(74.0, -31.0, 0.0),
            ],
            thumb_frame_deg: [-50.0, 0.0, 40.0],
            forearm_markers: [p(-150.0, 30.0, 0.0), p(-150.0, -30.0, 0.0)],
            joint_limits,
            rest_angles,
        }
    }
}

fn default_ranges() -> [JointRange; NUM_DOFS] {
    let r = |min, max, rest| JointRange { min, max, rest };
    let finger = [r(-90.0, 45.0, -25.0), r(-25.0, 25.0, 0.0), r(-110.0, 10.0, -35.0), r(-90.0, 20.0, -15.0)];
    let mut out = [r(0.0, 0.0, 0.0); NUM_DOFS];
    out[0] = r(-90.0, 90.0, 0.0);
    out[1] = r(-70.0, 70.0, 0.0);
    out[2] = r(-30.0, 25.0, 0.0);
    let thumb = [
        r(-50.0, 40.0, -10.0),
        r(-40.0, 40.0, 10.0),
        r(-70.0, 20.0, -15.0),
        r(-20.0, 20.0, 0.0),
        r(-90.0, 20.0, -10.0),
    ];
    out[3..8].copy_from_slice(&thumb);
    for f in Finger::LONG {
        out[f.dofs()].copy_from_slice(&finger);
    }
    out
}

impl KinematicModel {
    pub fn validate(&self) -> Result<()> {
        for (i, [lo, hi]) in self.joint_limits.iter().enumerate() {
            let name = DOF_TABLE[i].name();
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Config(format!("{name}: limits [{lo}, {hi}] are not an interval")));
            }
            let rest = self.rest_angles[i];
            if !(rest >= *lo && rest <= *hi) {
                return Err(Error::Config(format!("{name}: rest angle {rest} outside [{lo}, {hi}]")));
            }
        }
        for (f, lengths) in Finger::ALL.iter().zip(&self.segment_lengths) {
            if lengths.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
                return Err(Error::Config(format!("{}: segment lengths must be positive", f.name())));
            }
        }
        Ok(())
    }

    pub fn thumb_frame(&self) -> Rotation3<f64> {
        let [x, y, z] = self.thumb_frame_deg;
        intrinsic_xyz(x, y, z)
    }

    /// Orientation of a digit's reference frame in the palm frame.
    pub fn digit_frame(&self, finger: Finger) -> Rotation3<f64> {
        match finger {
            Finger::Thumb => self.thumb_frame(),
            _ => Rotation3::identity(),
        }
    }

    pub fn lower(&self, dof: usize) -> f64 {
        self.joint_limits[dof][0]
    }

    pub fn upper(&self, dof: usize) -> f64 {
        self.joint_limits[dof][1]
    }

    pub fn clamp(&self, dof: usize, value: f64) -> f64 {
        value.clamp(self.lower(dof), self.upper(dof))
    }

    /// Adapts the model to a subject from one frame of a recording.
    ///
    /// The palm layout and digit bases are scaled by the ratio of observed to
    /// modelled palm-marker spread; link lengths are taken from inter-marker
    /// distances. The palm orientation is recovered first so the proximal
    /// link can be measured from the scaled base.
    pub fn calibrated(&self, pose: &super::HandPose3D) -> Result<KinematicModel> {
        let observed: Vec<usize> = PALM_MARKERS.filter(|&i| pose.valid[i]).collect();
        if observed.len() < 3 {
            return Err(Error::DegeneratePose("calibration needs at least 3 palm markers".into()));
        }
        let mut model_spread = 0.0;
        let mut observed_spread = 0.0;
        for (a, &i) in observed.iter().enumerate() {
            for &j in &observed[a + 1..] {
                model_spread += (self.palm_markers[i] - self.palm_markers[j]).norm();
                observed_spread += (pose.markers[i] - pose.markers[j]).norm();
            }
        }
        let scale = observed_spread / model_spread;
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::DegeneratePose("palm markers coincide".into()));
        }
        let mut out = self.clone();
        for p in out.palm_markers.iter_mut().chain(out.finger_bases.iter_mut()) {
            *p = Point3::from(p.coords * scale);
        }
        let wrist = super::ik::ik_phase1_wrist(&out, pose)?;
        let rotation = wrist_rotation(&wrist);
        for f in Finger::ALL {
            let m = f.markers();
            if !m.clone().all(|i| pose.valid[i]) {
                continue;
            }
            let base = rotation * out.finger_bases[f.index()];
            let joints = [base, pose.markers[m.start], pose.markers[m.start + 1], pose.markers[m.start + 2]];
            for k in 0..3 {
                out.segment_lengths[f.index()][k] = (joints[k + 1] - joints[k]).norm();
            }
        }
        out.validate()?;
        Ok(out)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(&ModelFile::from(self)).expect("model serialises")
    }

    pub fn from_toml(text: &str) -> Result<KinematicModel> {
        let file: ModelFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let model = file.into_model()?;
        model.validate()?;
        Ok(model)
    }
}

/// `Rx(x) * Ry(y) * Rz(z)` with angles in degrees.
pub fn intrinsic_xyz(x: f64, y: f64, z: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vector3::x_axis(), x.to_radians())
        * Rotation3::from_axis_angle(&Vector3::y_axis(), y.to_radians())
        * Rotation3::from_axis_angle(&Vector3::z_axis(), z.to_radians())
}

/// Palm orientation from the three wrist DoFs (P-S, F-E, A-A) in degrees.
pub fn wrist_rotation(angles: &[f64; 3]) -> Rotation3<f64> {
    DOF_TABLE[0].axis.rotation(angles[0])
        * DOF_TABLE[1].axis.rotation(angles[1])
        * DOF_TABLE[2].axis.rotation(angles[2])
}

/// On-disk layout of the model: one table per digit and one per DoF.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    thumb_frame_deg: [f64; 3],
    palm_markers: Vec<[f64; 3]>,
    forearm_markers: Vec<[f64; 3]>,
    digits: BTreeMap<Finger, DigitFile>,
    joints: BTreeMap<String, JointRange>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DigitFile {
    base: [f64; 3],
    segment_lengths: [f64; 3],
}

fn arr(p: &Point3<f64>) -> [f64; 3] {
    [p.x, p.y, p.z]
}

impl From<&KinematicModel> for ModelFile {
    fn from(m: &KinematicModel) -> Self {
        let digits = Finger::ALL
            .iter()
            .map(|&f| {
                (f, DigitFile { base: arr(&m.finger_bases[f.index()]), segment_lengths: m.segment_lengths[f.index()] })
            })
            .collect();
        let joints = DOF_TABLE
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let [min, max] = m.joint_limits[i];
                (d.name(), JointRange { min, max, rest: m.rest_angles[i] })
            })
            .collect();
        ModelFile {
            thumb_frame_deg: m.thumb_frame_deg,
            palm_markers: m.palm_markers.iter().map(arr).collect(),
            forearm_markers: m.forearm_markers.iter().map(arr).collect(),
            digits,
            joints,
        }
    }
}

impl ModelFile {
    fn into_model(self) -> Result<KinematicModel> {
        let pt = |a: &[f64; 3]| Point3::new(a[0], a[1], a[2]);
        if self.palm_markers.len() != NUM_PALM_MARKERS {
            return Err(Error::Config(format!("expected {NUM_PALM_MARKERS} palm markers, found {}", self.palm_markers.len())));
        }
        if self.forearm_markers.len() != 2 {
            return Err(Error::Config(format!("expected 2 forearm markers, found {}", self.forearm_markers.len())));
        }
        let mut model = KinematicModel { thumb_frame_deg: self.thumb_frame_deg, ..KinematicModel::default() };
        for (i, p) in self.palm_markers.iter().enumerate() {
            model.palm_markers[i] = pt(p);
        }
        for (i, p) in self.forearm_markers.iter().enumerate() {
            model.forearm_markers[i] = pt(p);
        }
        for f in Finger::ALL {
            let digit = self.digits.get(&f).ok_or_else(|| Error::Config(format!("missing digit table `{}`", f.name())))?;
            model.finger_bases[f.index()] = pt(&digit.base);
            model.segment_lengths[f.index()] = digit.segment_lengths;
        }
        for (i, d) in DOF_TABLE.iter().enumerate() {
            let name = d.name();
            let range = self.joints.get(&name).ok_or_else(|| Error::Config(format!("missing joint table `{name}`")))?;
            model.joint_limits[i] = [range.min, range.max];
            model.rest_angles[i] = range.rest;
        }
        if let Some(unknown) = self.joints.keys().find(|k| !DOF_TABLE.iter().any(|d| &d.name() == *k)) {
            return Err(Error::Config(format!("unknown joint `{unknown}`")));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dof_table_shape() {
        let count = |k| DOF_TABLE.iter().filter(|d| d.kind == k).count();
        assert_eq!(DOF_TABLE.len(), 24);
        assert_eq!(count(DofKind::PronationSupination), 1);
        assert_eq!(Finger::Thumb.dofs().len(), 5);
        for f in Finger::LONG {
            assert_eq!(f.dofs().len(), 4);
        }
        let mut covered: Vec<usize> = WRIST_DOFS.collect();
        for f in Finger::ALL {
            covered.extend(f.dofs());
        }
        assert_eq!(covered, (0..24).collect::<Vec<_>>());
        let names: std::collections::HashSet<_> = DOF_TABLE.iter().map(|d| d.name()).collect();
        assert_eq!(names.len(), 24);
    }

    #[test]
    fn marker_slots_cover_hand() {
        let mut covered: Vec<usize> = PALM_MARKERS.collect();
        for f in Finger::ALL {
            covered.extend(f.markers());
        }
        assert_eq!(covered, (0..NUM_HAND_MARKERS).collect::<Vec<_>>());
        assert_eq!(Finger::Index.tip_marker(), 11);
    }

    #[test]
    fn default_model_is_valid() {
        KinematicModel::default().validate().unwrap();
    }

    #[test]
    fn invalid_limits_rejected() {
        let mut m = KinematicModel::default();
        m.joint_limits[5] = [10.0, -10.0];
        assert!(matches!(m.validate(), Err(Error::Config(_))));
        let mut m = KinematicModel::default();
        m.rest_angles[9] = 80.0;
        assert!(m.validate().is_err());
        let mut m = KinematicModel::default();
        m.segment_lengths[2][1] = 0.0;
        assert!(m.validate().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let m = KinematicModel::default();
        let text = m.to_toml();
        assert!(text.contains("[joints.INMP_FE]"));
        assert_eq!(KinematicModel::from_toml(&text).unwrap(), m);
    }

    #[test]
    fn toml_unknown_joint_rejected() {
        let text = KinematicModel::default().to_toml() + "\n[joints.XXXX_FE]\nmin = -1.0\nmax = 1.0\nrest = 0.0\n";
        assert!(matches!(KinematicModel::from_toml(&text), Err(Error::Config(_))));
    }
}
