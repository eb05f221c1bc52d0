//! Marker-to-angle projection in three phases: a closed-form palm
//! orientation, then one bounded least-squares fit per digit.

use nalgebra::{Matrix3, Rotation3};

use super::solver::{minimize_box, SolverSettings, Termination};
use super::{
    chain_markers, forward_kinematics, wrist_rotation, Finger, HandPose3D, JointAngles, KinematicModel,
    NUM_DOFS, NUM_HAND_MARKERS, PALM_MARKERS,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainStatus {
    Converged,
    /// Budget exhausted; the best iterate is reported.
    NotConverged,
    /// A marker of the chain was missing; its angles are the rest angles and
    /// must not be used as a measurement.
    MissingMarkers,
}

#[derive(Debug, Clone)]
pub struct ChainSolution {
    pub angles: Vec<f64>,
    pub status: ChainStatus,
    pub iterations: usize,
    pub evaluations: usize,
    /// Sum of squared marker residuals (mm^2).
    pub cost: f64,
}

impl ChainSolution {
    pub fn converged(&self) -> bool {
        self.status == ChainStatus::Converged
    }
}

#[derive(Debug, Clone)]
pub struct IkResult {
    pub angles: JointAngles,
    /// Mean distance between input hand markers and the reconstructed ones.
    pub approximation_error_mm: f64,
    /// Iterations spent in phase 1 (always 1), phase 2 (sum over fingers)
    /// and phase 3.
    pub per_phase_iterations: [usize; 3],
    /// Per digit, thumb first.
    pub chain_status: [ChainStatus; 5],
}

impl IkResult {
    pub fn all_converged(&self) -> bool {
        self.chain_status.iter().all(|s| *s == ChainStatus::Converged)
    }
}

/// Palm orientation (P-S, F-E, A-A in degrees) from the six palm markers.
///
/// The rotation about the wrist centre that best maps the reference palm
/// layout onto the observed markers (orthogonal Procrustes via SVD) is
/// decomposed into the wrist's intrinsic x-y-z angles. Angles are not clamped.
pub fn ik_phase1_wrist(model: &KinematicModel, pose: &HandPose3D) -> Result<[f64; 3]> {
    let pairs: Vec<_> = PALM_MARKERS
        .filter(|&i| pose.valid[i])
        .map(|i| (model.palm_markers[i], pose.markers[i]))
        .collect();
    if pairs.len() < 3 {
        return Err(Error::DegeneratePose(format!("{} valid palm markers, need 3", pairs.len())));
    }
    // Reject collinear layouts: the centred reference points must span a plane.
    let centroid = pairs.iter().map(|(r, _)| r.coords).sum::<nalgebra::Vector3<f64>>() / pairs.len() as f64;
    let spread = pairs.iter().fold(Matrix3::zeros(), |acc, (r, _)| {
        let c = r.coords - centroid;
        acc + c * c.transpose()
    });
    let sv = spread.symmetric_eigenvalues();
    let mut sv: Vec<f64> = sv.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    if sv[1] <= 1e-9 * sv[0].max(1e-300) {
        return Err(Error::DegeneratePose("palm markers are collinear".into()));
    }

    let cross = pairs.iter().fold(Matrix3::zeros(), |acc, (r, o)| acc + o.coords * r.coords.transpose());
    let svd = cross.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let d = (u * v_t).determinant().signum();
    let correction = Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, 1.0, d));
    let rotation = Rotation3::from_matrix_unchecked(u * correction * v_t);
    Ok(decompose_wrist(&rotation))
}

/// Inverse of [`wrist_rotation`]: `R = Rx(ps) * Ry(-fe) * Rz(aa)`.
fn decompose_wrist(r: &Rotation3<f64>) -> [f64; 3] {
    let m = r.matrix();
    let b = m[(0, 2)].clamp(-1.0, 1.0).asin();
    let a = (-m[(1, 2)]).atan2(m[(2, 2)]);
    let c = (-m[(0, 1)]).atan2(m[(0, 0)]);
    [a.to_degrees(), -b.to_degrees(), c.to_degrees()]
}

fn fit_chain(model: &KinematicModel, palm_pose: &HandPose3D, finger: Finger, settings: &SolverSettings) -> ChainSolution {
    let dofs = finger.dofs();
    let rest: Vec<f64> = model.rest_angles[dofs.clone()].to_vec();
    if !palm_pose.finger_valid(finger) {
        return ChainSolution {
            angles: rest,
            status: ChainStatus::MissingMarkers,
            iterations: 0,
            evaluations: 0,
            cost: f64::NAN,
        };
    }
    let lower: Vec<f64> = dofs.clone().map(|i| model.lower(i)).collect();
    let upper: Vec<f64> = dofs.clone().map(|i| model.upper(i)).collect();
    let targets = &palm_pose.markers[finger.markers()];
    let identity = Rotation3::identity();
    let sol = minimize_box(
        |x, r| {
            let m = chain_markers(model, &identity, finger, x);
            for k in 0..3 {
                let d = m[k] - targets[k];
                r[3 * k..3 * k + 3].copy_from_slice(d.as_slice());
            }
        },
        &rest,
        &lower,
        &upper,
        9,
        settings,
    );
    let status = if sol.termination.converged() || sol.termination == Termination::Stalled {
        ChainStatus::Converged
    } else {
        ChainStatus::NotConverged
    };
    ChainSolution { angles: sol.x, status, iterations: sol.iterations, evaluations: sol.evaluations, cost: sol.cost }
}

/// Angles of one long finger (MP F-E, MP A-A, IP F-E, ID F-E) from a pose
/// already expressed in the palm frame, starting from the rest angles and
/// bounded by the joint limits.
pub fn ik_phase2_finger(model: &KinematicModel, palm_pose: &HandPose3D, finger: Finger) -> Result<ChainSolution> {
    if finger == Finger::Thumb {
        return Err(Error::Contract("the thumb is solved by ik_phase3_thumb".into()));
    }
    Ok(fit_chain(model, palm_pose, finger, &SolverSettings::default()))
}

/// Thumb angles (MP F-E, MP A-A, IP F-E, IP A-A, ID F-E) from a pose in the
/// palm frame.
pub fn ik_phase3_thumb(model: &KinematicModel, palm_pose: &HandPose3D) -> Result<ChainSolution> {
    Ok(fit_chain(model, palm_pose, Finger::Thumb, &SolverSettings::default()))
}

/// Full projection of one frame onto the 24 joint angles.
///
/// Pure function of `pose`. A digit with missing markers keeps its rest
/// angles and is flagged in [`IkResult::chain_status`]; callers decide how
/// to fill it. Palm failures are errors.
pub fn inverse_kinematics(model: &KinematicModel, pose: &HandPose3D) -> Result<IkResult> {
    pose.check()?;
    let raw_wrist = ik_phase1_wrist(model, pose)?;
    let wrist = [model.clamp(0, raw_wrist[0]), model.clamp(1, raw_wrist[1]), model.clamp(2, raw_wrist[2])];
    let palm_pose = pose.rotated_into(&wrist_rotation(&wrist));

    let mut values = vec![0.0; NUM_DOFS];
    values[..3].copy_from_slice(&wrist);
    let mut chain_status = [ChainStatus::Converged; 5];
    let mut per_phase_iterations = [1, 0, 0];
    for finger in Finger::ALL {
        let sol = if finger == Finger::Thumb {
            ik_phase3_thumb(model, &palm_pose)?
        } else {
            ik_phase2_finger(model, &palm_pose, finger)?
        };
        per_phase_iterations[if finger == Finger::Thumb { 2 } else { 1 }] += sol.iterations;
        values[finger.dofs()].copy_from_slice(&sol.angles);
        chain_status[finger.index()] = sol.status;
    }

    let angles = JointAngles::new(values, pose.timestamp);
    let fitted = forward_kinematics(model, &angles)?;
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..NUM_HAND_MARKERS {
        let skip = Finger::ALL
            .iter()
            .any(|f| f.markers().contains(&i) && chain_status[f.index()] == ChainStatus::MissingMarkers);
        if pose.valid[i] && !skip {
            total += (fitted.markers[i] - pose.markers[i]).norm();
            count += 1;
        }
    }
    let approximation_error_mm = if count > 0 { total / count as f64 } else { f64::NAN };
    Ok(IkResult { angles, approximation_error_mm, per_phase_iterations, chain_status })
}
