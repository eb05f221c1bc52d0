//! Hand kinematics: the model, forward kinematics and the three-phase
//! inverse kinematic solver.

mod fk;
mod ik;
mod model;
pub mod solver;

pub use fk::{chain_markers, forward_kinematics};
pub use ik::{
    ik_phase1_wrist, ik_phase2_finger, ik_phase3_thumb, inverse_kinematics, ChainSolution, ChainStatus, IkResult,
};
pub use model::*;

use nalgebra::{Point3, Rotation3};

use crate::error::{Error, Result};

/// Joint angles in degrees for one instant, ordered as [`DOF_TABLE`].
#[derive(Debug, Clone, PartialEq)]
pub struct JointAngles {
    pub values: Vec<f64>,
    pub timestamp: f64,
}

impl JointAngles {
    pub fn new(values: Vec<f64>, timestamp: f64) -> Self {
        Self { values, timestamp }
    }

    pub fn zeros() -> Self {
        Self::new(vec![0.0; NUM_DOFS], 0.0)
    }

    pub fn rest(model: &KinematicModel) -> Self {
        Self::new(model.rest_angles.to_vec(), 0.0)
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.values.len() != NUM_DOFS {
            return Err(Error::Contract(format!("expected {NUM_DOFS} joint angles, got {}", self.values.len())));
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("joint angle {} is not finite", DOF_TABLE[i].name())));
        }
        Ok(())
    }
}

/// Marker positions (mm) for one motion-capture frame.
#[derive(Debug, Clone, PartialEq)]
pub struct HandPose3D {
    pub markers: Vec<Point3<f64>>,
    pub valid: Vec<bool>,
    pub timestamp: f64,
}

impl HandPose3D {
    pub fn new(markers: Vec<Point3<f64>>, timestamp: f64) -> Self {
        let valid = vec![true; markers.len()];
        Self { markers, valid, timestamp }
    }

    pub fn check(&self) -> Result<()> {
        if self.markers.len() != NUM_MARKERS || self.valid.len() != NUM_MARKERS {
            return Err(Error::Contract(format!("expected {NUM_MARKERS} marker slots, got {}", self.markers.len())));
        }
        for (i, (p, v)) in self.markers.iter().zip(&self.valid).enumerate() {
            if *v && !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(Error::InvalidInput(format!("marker {i} is flagged valid but not finite")));
            }
        }
        Ok(())
    }

    /// Expresses the pose in a frame rotated by `rotation` about the wrist
    /// centre (applies the inverse rotation to every marker).
    pub fn rotated_into(&self, rotation: &Rotation3<f64>) -> HandPose3D {
        let inv = rotation.inverse();
        HandPose3D {
            markers: self.markers.iter().map(|p| inv * p).collect(),
            valid: self.valid.clone(),
            timestamp: self.timestamp,
        }
    }

    pub fn finger_valid(&self, finger: Finger) -> bool {
        finger.markers().all(|i| self.valid[i])
    }
}
