use nalgebra::{Point3, Rotation3, Vector3};

use super::{chain_links, wrist_rotation, Finger, HandPose3D, JointAngles, KinematicModel, DOF_TABLE, NUM_MARKERS};
use crate::error::Result;

/// Marker positions of one digit chain in the frame given by `frame`.
///
/// `frame` is the palm orientation (identity when working in the palm frame)
/// and `dofs` holds the digit's own angles in degrees, in the order of
/// [`Finger::dofs`].
pub fn chain_markers(model: &KinematicModel, frame: &Rotation3<f64>, finger: Finger, dofs: &[f64]) -> [Point3<f64>; 3] {
    let first = finger.dofs().start;
    let lengths = model.segment_lengths[finger.index()];
    let mut orientation = frame * model.digit_frame(finger);
    let mut position = frame * model.finger_bases[finger.index()];
    let mut out = [Point3::origin(); 3];
    for (k, link) in chain_links(finger).iter().enumerate() {
        for &offset in link.iter() {
            orientation *= DOF_TABLE[first + offset].axis.rotation(dofs[offset]);
        }
        position += orientation * Vector3::new(lengths[k], 0.0, 0.0);
        out[k] = position;
    }
    out
}

/// Maps 24 joint angles to the 23 marker positions of the model.
///
/// The wrist rotates the whole hand about the wrist centre; each digit is a
/// serial chain rooted at its base. Forearm markers are fixed.
pub fn forward_kinematics(model: &KinematicModel, angles: &JointAngles) -> Result<HandPose3D> {
    angles.check()?;
    let a = &angles.values;
    let wrist = wrist_rotation(&[a[0], a[1], a[2]]);
    let mut markers = vec![Point3::origin(); NUM_MARKERS];
    for (slot, p) in markers.iter_mut().zip(&model.palm_markers) {
        *slot = wrist * p;
    }
    for f in Finger::ALL {
        let chain = chain_markers(model, &wrist, f, &a[f.dofs()]);
        markers[f.markers()].copy_from_slice(&chain);
    }
    markers[super::FOREARM_MARKERS].copy_from_slice(&model.forearm_markers);
    Ok(HandPose3D::new(markers, angles.timestamp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::kinematics::{PALM_MARKERS, NUM_HAND_MARKERS};
    use approx::assert_abs_diff_eq;

    #[test]
    fn reference_pose_lies_on_reference_planes() {
        let model = KinematicModel::default();
        let pose = forward_kinematics(&model, &JointAngles::zeros()).unwrap();
        // Long fingers: on plane K (z = 0), along +x from their base,
        // perpendicular to the knuckle line Q (the y axis).
        for f in Finger::LONG {
            let base = model.finger_bases[f.index()];
            for i in f.markers() {
                let p = pose.markers[i];
                assert_abs_diff_eq!(p.z, 0.0, epsilon = 1e-12);
                assert_abs_diff_eq!(p.y, base.y, epsilon = 1e-12);
                assert!(p.x > base.x);
            }
        }
        // Thumb: along the x axis of its own frame, i.e. in plane T and
        // perpendicular to line H (the frame's y axis).
        let frame = model.thumb_frame();
        let base = model.finger_bases[0];
        for i in Finger::Thumb.markers() {
            let local = frame.inverse() * (pose.markers[i] - base);
            assert_abs_diff_eq!(local.y, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(local.z, 0.0, epsilon = 1e-12);
            assert!(local.x > 0.0);
        }
    }

    #[test]
    fn wrist_flexion_is_rigid_rotation() {
        let model = KinematicModel::default();
        let reference = forward_kinematics(&model, &JointAngles::zeros()).unwrap();
        let theta = 27.0;
        let mut angles = JointAngles::zeros();
        angles.values[1] = theta;
        let moved = forward_kinematics(&model, &angles).unwrap();
        let axis = DOF_TABLE[1].axis.rotation(theta);
        for i in 0..NUM_HAND_MARKERS {
            let expected = axis * reference.markers[i];
            assert_abs_diff_eq!((moved.markers[i] - expected).norm(), 0.0, epsilon = 1e-12);
        }
        // Positive flexion-extension means extension: the fingertips move dorsally.
        assert!(moved.markers[Finger::Middle.tip_marker()].z > 0.0);
    }

    #[test]
    fn positive_mp_angles_extend_and_deviate_radially() {
        let model = KinematicModel::default();
        let mut angles = JointAngles::zeros();
        let d = Finger::Index.dofs().start;
        angles.values[d] = 20.0;
        let pose = forward_kinematics(&model, &angles).unwrap();
        assert!(pose.markers[Finger::Index.markers().start].z > 0.0);
        let mut angles = JointAngles::zeros();
        angles.values[d + 1] = 15.0;
        let pose = forward_kinematics(&model, &angles).unwrap();
        assert!(pose.markers[Finger::Index.markers().start].y > model.finger_bases[1].y);
    }

    #[test]
    fn segment_lengths_preserved() {
        let model = KinematicModel::default();
        let mut angles = JointAngles::rest(&model);
        angles.values.iter_mut().enumerate().for_each(|(i, v)| *v += (i as f64 * 7.3).sin() * 20.0);
        let pose = forward_kinematics(&model, &angles).unwrap();
        for f in Finger::ALL {
            let m = f.markers();
            let l = model.segment_lengths[f.index()];
            assert_abs_diff_eq!((pose.markers[m.start + 1] - pose.markers[m.start]).norm(), l[1], epsilon = 1e-9);
            assert_abs_diff_eq!((pose.markers[m.start + 2] - pose.markers[m.start + 1]).norm(), l[2], epsilon = 1e-9);
        }
        for i in PALM_MARKERS {
            assert_abs_diff_eq!(pose.markers[i].coords.norm(), model.palm_markers[i].coords.norm(), epsilon = 1e-9);
        }
    }

    #[test]
    fn deterministic() {
        let model = KinematicModel::default();
        let mut angles = JointAngles::rest(&model);
        angles.values[4] = 12.345;
        let a = forward_kinematics(&model, &angles).unwrap();
        let b = forward_kinematics(&model, &angles).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_angles() {
        let model = KinematicModel::default();
        let short = JointAngles::new(vec![0.0; 23], 0.0);
        assert!(matches!(forward_kinematics(&model, &short), Err(Error::Contract(_))));
        let mut nan = JointAngles::zeros();
        nan.values[3] = f64::NAN;
        assert!(matches!(forward_kinematics(&model, &nan), Err(Error::InvalidInput(_))));
    }
}
