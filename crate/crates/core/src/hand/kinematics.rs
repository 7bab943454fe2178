use alloc::vec::Vec;

use nalgebra::{Rotation3, Vector3};

use super::joints::{JointLocations, LayerSet};
use super::kabsch::{infer_global_pose, KabschFit};
use super::pose::{EulerZxy, GlobalPose, LayerAngles, PoseParams};
use super::skeleton::{HandSkeleton, FINGER_COUNT, LAYER_COUNT, PALM_JOINT_COUNT};
use crate::math::{asin, atan2};
use crate::{Error, Result};

/// Observed bones shorter than this are treated as zero length.
const MIN_BONE: f64 = 1e-12;

/// Rotation `Rz(a[0]) * Rx(a[1]) * Ry(a[2])`.
pub fn euler_zxy(a: &EulerZxy) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vector3::z_axis(), a[0])
        * Rotation3::from_axis_angle(&Vector3::x_axis(), a[1])
        * Rotation3::from_axis_angle(&Vector3::y_axis(), a[2])
}

/// Orientation of every finger bone; the bone points along the frame's +y.
///
/// `0[0][f]` is the wrist-to-root bone of finger `f` (0-based) and `0[l][f]`
/// the bone ending at the layer-`l` joint. The frames carry roll as well as
/// direction, which is what makes the three bone angles well defined.
#[derive(Clone, Debug, PartialEq)]
pub struct BoneFrames(pub [[Rotation3<f64>; FINGER_COUNT]; LAYER_COUNT]);

impl BoneFrames {
    pub fn identity() -> Self {
        BoneFrames([[Rotation3::identity(); FINGER_COUNT]; LAYER_COUNT])
    }

    pub fn layer(&self, layer: usize) -> &[Rotation3<f64>; FINGER_COUNT] {
        &self.0[layer]
    }
}

/// Joint locations together with the bone frames that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct Articulation {
    pub joints: JointLocations,
    pub frames: BoneFrames,
}

/// Frames of the five wrist-to-root bones under a global pose.
pub fn palm_frames(skeleton: &HandSkeleton, global: &GlobalPose) -> [Rotation3<f64>; FINGER_COUNT] {
    let r = global.rotation.to_rotation_matrix();
    core::array::from_fn(|f| r * skeleton.rest_frame(f + 1))
}

/// The reference palm moved rigidly by `global`.
pub fn place_palm(
    skeleton: &HandSkeleton,
    global: &GlobalPose,
) -> [Vector3<f64>; PALM_JOINT_COUNT] {
    core::array::from_fn(|j| global.rotation * skeleton.palm_reference[j] + global.translation)
}

/// Places the five joints of `layer` (1..=3) from their parents.
///
/// Each joint sits at `parent + length * (F * E(angles)) * y`, where `F` is the
/// parent bone frame. Returns the joints and the new bone frames.
pub fn place_layer(
    skeleton: &HandSkeleton,
    layer: usize,
    parent_joints: &[Vector3<f64>; FINGER_COUNT],
    parent_frames: &[Rotation3<f64>; FINGER_COUNT],
    angles: &LayerAngles,
) -> ([Vector3<f64>; FINGER_COUNT], [Rotation3<f64>; FINGER_COUNT]) {
    let frames: [Rotation3<f64>; FINGER_COUNT] =
        core::array::from_fn(|f| parent_frames[f] * euler_zxy(&angles[f]));
    let joints = core::array::from_fn(|f| {
        parent_joints[f] + skeleton.bone_length(layer, f + 1) * (frames[f] * Vector3::y())
    });
    (joints, frames)
}

/// Forward kinematics keeping the bone frames.
pub fn articulate(
    skeleton: &HandSkeleton,
    pose: &PoseParams,
    up_to_layer: usize,
) -> Result<Articulation> {
    if up_to_layer >= LAYER_COUNT {
        return Err(Error::InvalidParameter(alloc::format!(
            "layer {up_to_layer} out of range"
        )));
    }
    pose.validate()?;
    let palm = place_palm(skeleton, &pose.global);
    let mut frames = BoneFrames::identity();
    frames.0[0] = palm_frames(skeleton, &pose.global);

    let mut points: Vec<Vector3<f64>> = palm.to_vec();
    let mut parents: [Vector3<f64>; FINGER_COUNT] = core::array::from_fn(|f| palm[f + 1]);
    for layer in 1..=up_to_layer {
        let (joints, layer_frames) = place_layer(
            skeleton,
            layer,
            &parents,
            &frames.0[layer - 1],
            pose.angles(layer),
        );
        points.extend_from_slice(&joints);
        frames.0[layer] = layer_frames;
        parents = joints;
    }
    Ok(Articulation {
        joints: JointLocations::new(LayerSet::up_to(up_to_layer), points)?,
        frames,
    })
}

/// Joint locations of layers `0..=up_to_layer` for `pose`.
pub fn forward_kinematics(
    skeleton: &HandSkeleton,
    pose: &PoseParams,
    up_to_layer: usize,
) -> Result<JointLocations> {
    articulate(skeleton, pose, up_to_layer).map(|a| a.joints)
}

/// Bone rotations recovered for one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct BoneRotations {
    pub angles: LayerAngles,
    /// Frames of the bones ending at this layer's joints, as FK would build them.
    pub frames: [Rotation3<f64>; FINGER_COUNT],
    /// Fingers whose observed joint coincided with its parent.
    pub degenerate: [bool; FINGER_COUNT],
}

/// Recovers the layer's bone angles from observed joints.
///
/// The observed bone direction is expressed in the parent bone frame (whose
/// +y axis is the parent-minus-grandparent direction, the wrist standing in
/// for the grandparent of layer 1) and decomposed into swing and bend. The
/// twist about the bone is unobservable and is returned as zero. Feeding the
/// result back through [`place_layer`] puts each joint at exactly one bone
/// length from its parent along the observed direction.
pub fn infer_bone_rotations(
    _skeleton: &HandSkeleton,
    layer: usize,
    joints_here: &[Vector3<f64>; FINGER_COUNT],
    joints_parent: &[Vector3<f64>; FINGER_COUNT],
    parent_frames: &[Rotation3<f64>; FINGER_COUNT],
) -> Result<BoneRotations> {
    if !(1..LAYER_COUNT).contains(&layer) {
        return Err(Error::InvalidParameter(alloc::format!(
            "bone rotations exist for layers 1..=3, got {layer}"
        )));
    }
    let mut angles = [[0.0; 3]; FINGER_COUNT];
    let mut degenerate = [false; FINGER_COUNT];
    for f in 0..FINGER_COUNT {
        let local = parent_frames[f].inverse() * (joints_here[f] - joints_parent[f]);
        let len = local.norm();
        if !(len > MIN_BONE) {
            degenerate[f] = true;
            continue;
        }
        let d = local / len;
        angles[f] = [atan2(-d.x, d.y), asin(d.z.clamp(-1.0, 1.0)), 0.0];
    }
    let frames = core::array::from_fn(|f| parent_frames[f] * euler_zxy(&angles[f]));
    Ok(BoneRotations {
        angles,
        frames,
        degenerate,
    })
}

/// Full pose recovered from 21 joints.
#[derive(Clone, Debug, PartialEq)]
pub struct InferredPose {
    pub pose: PoseParams,
    pub frames: BoneFrames,
    pub palm_fit: KabschFit,
    /// `degenerate[l - 1][f]` flags zero-length observed bones.
    pub degenerate: [[bool; FINGER_COUNT]; 3],
}

/// Inverse kinematics over all four layers: Kabsch on the palm, then bone
/// rotations layer by layer against the observed parents.
pub fn infer_pose(skeleton: &HandSkeleton, joints: &JointLocations) -> Result<InferredPose> {
    let palm = joints
        .layer(0)
        .ok_or_else(|| Error::JointSetMismatch("layer 0 missing".into()))?;
    let palm_fit = infer_global_pose(skeleton, palm)?;
    let mut frames = BoneFrames::identity();
    frames.0[0] = palm_frames(skeleton, &palm_fit.pose);
    let mut pose = PoseParams {
        global: palm_fit.pose,
        ..PoseParams::identity()
    };
    let mut degenerate = [[false; FINGER_COUNT]; 3];
    let mut parents: [Vector3<f64>; FINGER_COUNT] = core::array::from_fn(|f| palm[f + 1]);
    for layer in 1..LAYER_COUNT {
        let here: [Vector3<f64>; FINGER_COUNT] = joints
            .layer(layer)
            .ok_or_else(|| Error::JointSetMismatch(alloc::format!("layer {layer} missing")))?
            .try_into()
            .expect("finger layers hold five joints");
        let rot = infer_bone_rotations(skeleton, layer, &here, &parents, &frames.0[layer - 1])?;
        pose.layer_angles[layer - 1] = rot.angles;
        frames.0[layer] = rot.frames;
        degenerate[layer - 1] = rot.degenerate;
        parents = here;
    }
    Ok(InferredPose {
        pose,
        frames,
        palm_fit,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hand::skeleton::{flat_index, layer_joint_range};
    use nalgebra::UnitQuaternion;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pose(rng: &mut ChaCha8Rng, skel: &HandSkeleton) -> PoseParams {
        let axis = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let rotation = UnitQuaternion::from_scaled_axis(axis);
        let translation = Vector3::new(
            rng.random_range(0.2..0.8),
            rng.random_range(0.2..0.8),
            rng.random_range(0.8..1.2),
        );
        let mut pose = PoseParams {
            global: GlobalPose {
                rotation,
                translation,
            },
            ..PoseParams::identity()
        };
        for l in 1..=3 {
            for f in 0..FINGER_COUNT {
                for c in 0..3 {
                    let [lo, hi] = skel.limits.range(l, c);
                    pose.layer_angles[l - 1][f][c] = if hi > lo {
                        rng.random_range(lo..hi)
                    } else {
                        lo
                    };
                }
            }
        }
        pose
    }

    #[test]
    fn identity_pose_reproduces_reference() {
        let skel = HandSkeleton::default();
        let joints = forward_kinematics(&skel, &PoseParams::identity(), 3).unwrap();
        for j in 0..6 {
            assert_eq!(joints.get(0, j).unwrap(), skel.palm_reference[j]);
        }
        for f in 1..=5 {
            let dir = skel.palm_reference[f].normalize();
            let mut expect = skel.palm_reference[f];
            for l in 1..=3 {
                expect += skel.bone_length(l, f) * dir;
                assert!((joints.get(l, f).unwrap() - expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn translation_shifts_every_joint() {
        let skel = HandSkeleton::default();
        let base = forward_kinematics(&skel, &PoseParams::identity(), 3).unwrap();
        let mut pose = PoseParams::identity();
        pose.global.translation = Vector3::new(0.1, 0.0, 0.0);
        let moved = forward_kinematics(&skel, &pose, 3).unwrap();
        for (a, b) in base.points().iter().zip(moved.points()) {
            assert!((b - a - Vector3::new(0.1, 0.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn rejects_non_unit_quaternion() {
        let skel = HandSkeleton::default();
        let mut pose = PoseParams::identity();
        pose.global.rotation =
            UnitQuaternion::new_unchecked(nalgebra::Quaternion::new(1.1, 0.0, 0.0, 0.0));
        assert!(matches!(
            forward_kinematics(&skel, &pose, 0),
            Err(Error::NonUnitQuaternion(_))
        ));
    }

    #[test]
    fn bone_lengths_conserved() {
        let skel = HandSkeleton::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let pose = random_pose(&mut rng, &skel);
            let joints = forward_kinematics(&skel, &pose, 3).unwrap();
            for l in 1..=3 {
                for f in layer_joint_range(l) {
                    let parent = if l == 1 {
                        joints.get(0, f)
                    } else {
                        joints.get(l - 1, f)
                    };
                    let d = (joints.get(l, f).unwrap() - parent.unwrap()).norm();
                    assert!((d - skel.bone_length(l, f)).abs() < 1e-9);
                }
            }
            for &frame in articulate(&skel, &pose, 3)
                .unwrap()
                .frames
                .0
                .iter()
                .flatten()
            {
                assert!((frame.matrix().determinant() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn bone_rotation_roundtrip() {
        let skel = HandSkeleton::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let pose = random_pose(&mut rng, &skel);
            let art = articulate(&skel, &pose, 3).unwrap();
            let inferred = infer_pose(&skel, &art.joints).unwrap();
            for l in 1..=3 {
                for f in 0..FINGER_COUNT {
                    for c in 0..3 {
                        let got = inferred.pose.layer_angles[l - 1][f][c];
                        let want = pose.layer_angles[l - 1][f][c];
                        assert!(
                            (got - want).abs() < 1e-9,
                            "layer {l} finger {f}: {got} vs {want}"
                        );
                    }
                }
            }
            let again = forward_kinematics(&skel, &inferred.pose, 3).unwrap();
            for k in 0..21 {
                assert!((again.points()[k] - art.joints.points()[k]).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn collinear_joint_gives_zero_rotation() {
        let skel = HandSkeleton::default();
        let frames = palm_frames(&skel, &GlobalPose::identity());
        let parents: [Vector3<f64>; 5] = core::array::from_fn(|f| skel.palm_reference[f + 1]);
        let here: [Vector3<f64>; 5] = core::array::from_fn(|f| {
            parents[f] + skel.bone_length(1, f + 1) * (frames[f] * Vector3::y())
        });
        let rot = infer_bone_rotations(&skel, 1, &here, &parents, &frames).unwrap();
        for a in rot.angles.iter().flatten() {
            assert!(a.abs() < 1e-12);
        }
    }

    #[test]
    fn stretched_bone_projects_to_exact_length() {
        let skel = HandSkeleton::default();
        let frames = palm_frames(&skel, &GlobalPose::identity());
        let parents: [Vector3<f64>; 5] = core::array::from_fn(|f| skel.palm_reference[f + 1]);
        let dir = Vector3::new(0.3, 0.9, -0.2).normalize();
        let here: [Vector3<f64>; 5] =
            core::array::from_fn(|f| parents[f] + 1.3 * skel.bone_length(1, f + 1) * dir);
        let rot = infer_bone_rotations(&skel, 1, &here, &parents, &frames).unwrap();
        let (placed, _) = place_layer(&skel, 1, &parents, &frames, &rot.angles);
        for f in 0..5 {
            let bone = placed[f] - parents[f];
            assert!((bone.norm() - skel.bone_length(1, f + 1)).abs() < 1e-12);
            assert!((bone.normalize() - dir).norm() < 1e-12);
        }
    }

    #[test]
    fn coincident_joint_is_flagged() {
        let skel = HandSkeleton::default();
        let frames = palm_frames(&skel, &GlobalPose::identity());
        let parents: [Vector3<f64>; 5] = core::array::from_fn(|f| skel.palm_reference[f + 1]);
        let rot = infer_bone_rotations(&skel, 1, &parents, &parents, &frames).unwrap();
        assert!(rot.degenerate.iter().all(|&d| d));
        assert!(rot.angles.iter().flatten().all(|&a| a == 0.0));
        assert!(infer_bone_rotations(&skel, 0, &parents, &parents, &frames).is_err());
    }

    #[test]
    fn flat_layout_matches_fk_order() {
        let skel = HandSkeleton::default();
        let joints = forward_kinematics(&skel, &PoseParams::identity(), 3).unwrap();
        for (k, (l, j, p)) in joints.iter().enumerate() {
            assert_eq!(flat_index(l, j), Some(k));
            assert_eq!(joints.points()[k], p);
        }
    }
}
