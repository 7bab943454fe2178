use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::frame::{Camera, DepthFrame};
use super::render::render;
use crate::hand::{
    forward_kinematics, AngleLimits, GlobalPose, HandSkeleton, JointLocations, PoseParams,
    FINGER_COUNT,
};
use crate::Result;

/// Model-space point placed at the attention center of the frame; roughly
/// the middle of the wrist-to-fingertip span.
const HAND_CENTER: [f64; 3] = [0.0, 0.17, 0.0];

/// Sampling ranges for synthetic poses.
///
/// The global rotation is `Rz(-alpha) * Rx(pitch) * Ry(roll) * Rx(pi)`: the
/// last factor turns the +y model fingers to point up the image, pitch and
/// roll tilt the hand without changing its in-plane angle, and `alpha` is
/// exactly the in-plane rotation measured from the wrist and middle root.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct PoseSampler {
    /// In-plane rotation interval, radians.
    pub in_plane: [f64; 2],
    /// Pitch and roll are drawn uniformly from `[-tilt, tilt]`, radians.
    pub tilt: f64,
    /// Hand center offset from the image center, per axis, normalized units.
    pub center_jitter: f64,
    /// Depth interval of the hand center.
    pub depth: [f64; 2],
    /// Finger angle intervals; kept inside the skeleton's limits.
    pub limits: AngleLimits,
    pub seed: u64,
}

impl PoseSampler {
    pub fn new(skeleton: &HandSkeleton, seed: u64) -> Self {
        Self {
            in_plane: [-PI / 3.0, PI / 3.0],
            tilt: 0.35,
            center_jitter: 0.04,
            depth: [0.95, 1.05],
            limits: if AngleLimits::sampling().within(&skeleton.limits) {
                AngleLimits::sampling()
            } else {
                skeleton.limits.clone()
            },
            seed,
        }
    }

    /// The `index`-th pose. Every index draws from its own ChaCha stream, so
    /// samples are independent of generation order.
    pub fn sample(&self, index: u64) -> SampledPose {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);

        let alpha = uniform(&mut rng, self.in_plane);
        let pitch = uniform(&mut rng, [-self.tilt, self.tilt]);
        let roll = uniform(&mut rng, [-self.tilt, self.tilt]);
        let rotation = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), -alpha)
            * UnitQuaternion::from_axis_angle(&Vector3::x_axis(), pitch)
            * UnitQuaternion::from_axis_angle(&Vector3::y_axis(), roll)
            * UnitQuaternion::from_axis_angle(&Vector3::x_axis(), PI);
        let center = Vector3::new(
            0.5 + uniform(&mut rng, [-self.center_jitter, self.center_jitter]),
            0.5 + uniform(&mut rng, [-self.center_jitter, self.center_jitter]),
            uniform(&mut rng, self.depth),
        );
        let translation = center - rotation * Vector3::from(HAND_CENTER);

        let mut pose = PoseParams {
            global: GlobalPose {
                rotation,
                translation,
            }
            .canonical(),
            ..PoseParams::identity()
        };
        for layer in 1..=3 {
            for f in 0..FINGER_COUNT {
                for c in 0..3 {
                    pose.layer_angles[layer - 1][f][c] =
                        uniform(&mut rng, self.limits.range(layer, c));
                }
            }
        }
        SampledPose {
            pose,
            in_plane: alpha,
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampledPose {
    pub pose: PoseParams,
    /// The in-plane rotation drawn for this pose.
    pub in_plane: f64,
}

/// One synthetic frame with its ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub frame: DepthFrame,
    pub joints: JointLocations,
    pub pose: PoseParams,
}

pub fn generate_sample(
    sampler: &PoseSampler,
    skeleton: &HandSkeleton,
    camera: &Camera,
    index: u64,
) -> Result<Sample> {
    let pose = sampler.sample(index).pose;
    let frame = render(&pose, skeleton, camera)?;
    let joints = forward_kinematics(skeleton, &pose, 3)?;
    Ok(Sample {
        frame,
        joints,
        pose,
    })
}

/// `n` independent samples; a fixed sampler seed gives an identical dataset.
pub fn generate_dataset(
    sampler: &PoseSampler,
    skeleton: &HandSkeleton,
    camera: &Camera,
    n: usize,
) -> Result<Vec<Sample>> {
    (0..n as u64)
        .map(|i| generate_sample(sampler, skeleton, camera, i))
        .collect()
}
