use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

use super::pose::GlobalPose;
use super::skeleton::{HandSkeleton, PALM_JOINT_COUNT};
use crate::math::sqrt;
use crate::{Error, Result};

/// Relative size of the second singular value below which the cross
/// covariance is treated as rank deficient (collinear or coincident points).
const RANK_TOLERANCE: f64 = 1e-9;

/// Result of a rigid least-squares alignment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KabschFit {
    /// Maps reference points onto observed points.
    pub pose: GlobalPose,
    /// Root-mean-square residual after alignment.
    pub rms: f64,
    /// The observed points did not determine a rotation; `pose` is then a
    /// pure translation aligning the centroids.
    pub rank_deficient: bool,
}

/// Proper rigid transform minimizing `sum |R * reference_i + t - observed_i|^2`.
///
/// The rotation comes from the SVD of the cross covariance. When the naive
/// solution is a reflection, the singular vector paired with the smallest
/// singular value is negated.
pub fn kabsch(reference: &[Vector3<f64>], observed: &[Vector3<f64>]) -> KabschFit {
    assert_eq!(
        reference.len(),
        observed.len(),
        "point sets differ in length"
    );
    assert!(!reference.is_empty(), "empty point set");
    let n = reference.len() as f64;
    let c_ref = reference.iter().sum::<Vector3<f64>>() / n;
    let c_obs = observed.iter().sum::<Vector3<f64>>() / n;

    let mut cov = Matrix3::zeros();
    for (r, o) in reference.iter().zip(observed) {
        cov += (r - c_ref) * (o - c_obs).transpose();
    }

    let svd = cov.svd(true, true);
    let s = svd.singular_values;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let rank_deficient = !(s[order[0]] > 0.0) || s[order[1]] <= RANK_TOLERANCE * s[order[0]];

    let rotation = if rank_deficient {
        Rotation3::identity()
    } else {
        let u = svd.u.expect("requested U");
        let mut v = svd.v_t.expect("requested V^T").transpose();
        if (v * u.transpose()).determinant() < 0.0 {
            let k = order[2];
            v.set_column(k, &(-v.column(k)));
        }
        Rotation3::from_matrix_unchecked(v * u.transpose())
    };
    let translation = c_obs - rotation * c_ref;

    let sq: f64 = reference
        .iter()
        .zip(observed)
        .map(|(r, o)| (rotation * r + translation - o).norm_squared())
        .sum();
    KabschFit {
        pose: GlobalPose {
            rotation: UnitQuaternion::from_rotation_matrix(&rotation),
            translation,
        }
        .canonical(),
        rms: sqrt(sq / n),
        rank_deficient,
    }
}

/// Global pose aligning the reference palm to six observed palm joints.
pub fn infer_global_pose(
    skeleton: &HandSkeleton,
    palm_joints: &[Vector3<f64>],
) -> Result<KabschFit> {
    if palm_joints.len() != PALM_JOINT_COUNT {
        return Err(Error::JointSetMismatch(alloc::format!(
            "expected {PALM_JOINT_COUNT} palm joints, got {}",
            palm_joints.len()
        )));
    }
    if palm_joints.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(Error::InvalidParameter("non-finite palm joint".into()));
    }
    Ok(kabsch(&skeleton.palm_reference, palm_joints))
}
