//! Kinematic hand model.
//!
//! 21 joints are split into four layers. Layer 0 is the rigid palm (wrist and
//! the five finger roots); layers 1 to 3 hold one joint per finger, each
//! attached to the joint of the same finger one layer below. The pose is
//! parameterized by a global rigid transform (quaternion and translation) and
//! three sets of five Euler-angle triples, 51 scalars in total.

mod joints;
mod kabsch;
mod kinematics;
mod pose;
mod skeleton;

pub use joints::{JointLocations, LayerSet};
pub use kabsch::{infer_global_pose, kabsch, KabschFit};
pub use kinematics::{
    articulate, euler_zxy, forward_kinematics, infer_bone_rotations, infer_pose, palm_frames,
    place_layer, place_palm, Articulation, BoneFrames, BoneRotations, InferredPose,
};
pub use pose::{EulerZxy, GlobalPose, LayerAngles, PoseParams};
pub use skeleton::{
    flat_index, layer_joint, layer_joint_range, layer_len, AngleLimits, HandSkeleton, FINGER_COUNT,
    JOINT_COUNT, LAYER_COUNT, MIDDLE_ROOT, PALM_JOINT_COUNT, WRIST,
};
