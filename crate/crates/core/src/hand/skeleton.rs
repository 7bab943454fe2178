use alloc::format;
use core::ops::Range;

use nalgebra::{Rotation3, Vector3};
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const LAYER_COUNT: usize = 4;
pub const PALM_JOINT_COUNT: usize = 6;
pub const FINGER_COUNT: usize = 5;
pub const JOINT_COUNT: usize = 21;
/// Layer-0 index of the wrist.
pub const WRIST: usize = 0;
/// Layer-0 index of the middle-finger root.
pub const MIDDLE_ROOT: usize = 3;

/// Number of joints in `layer`.
pub const fn layer_len(layer: usize) -> usize {
    if layer == 0 {
        PALM_JOINT_COUNT
    } else {
        FINGER_COUNT
    }
}

/// Valid joint indices `j` within `layer`: `0..6` for the palm, `1..6` for finger layers.
pub const fn layer_joint_range(layer: usize) -> Range<usize> {
    if layer == 0 {
        0..PALM_JOINT_COUNT
    } else {
        1..FINGER_COUNT + 1
    }
}

/// Flat index in `0..21` of joint `j` in `layer`.
pub fn flat_index(layer: usize, j: usize) -> Option<usize> {
    match layer {
        0 if j < PALM_JOINT_COUNT => Some(j),
        1..=3 if (1..=FINGER_COUNT).contains(&j) => {
            Some(PALM_JOINT_COUNT + FINGER_COUNT * (layer - 1) + (j - 1))
        }
        _ => None,
    }
}

/// Inverse of [`flat_index`].
pub fn layer_joint(flat: usize) -> Option<(usize, usize)> {
    if flat < PALM_JOINT_COUNT {
        Some((0, flat))
    } else if flat < JOINT_COUNT {
        let k = flat - PALM_JOINT_COUNT;
        Some((1 + k / FINGER_COUNT, 1 + k % FINGER_COUNT))
    } else {
        None
    }
}

/// Per-layer `[min, max]` bounds of the intrinsic Z, X, Y bone angles.
///
/// Indexed `[layer - 1][component]`. The Y component is the twist about the
/// bone axis; it cannot be observed from joint positions, so the defaults pin
/// it to zero. Bends stay inside `(-pi/2, pi/2)`, where the swing and bend
/// decomposition is unique.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct AngleLimits {
    pub layers: [[[f64; 2]; 3]; 3],
}

/// Anatomical range of motion.
impl Default for AngleLimits {
    fn default() -> Self {
        Self {
            layers: [
                [[-0.6, 0.6], [-1.5, 0.5], [0.0, 0.0]],
                [[-0.3, 0.3], [-1.5, 0.2], [0.0, 0.0]],
                [[-0.3, 0.3], [-1.4, 0.2], [0.0, 0.0]],
            ],
        }
    }
}

impl AngleLimits {
    /// Narrower ranges the synthetic sampler draws from, giving moderately
    /// curled, unoccluded fingers.
    pub fn sampling() -> Self {
        Self {
            layers: [
                [[-0.3, 0.3], [-0.8, 0.2], [0.0, 0.0]],
                [[-0.1, 0.1], [-0.9, 0.0], [0.0, 0.0]],
                [[-0.1, 0.1], [-0.7, 0.0], [0.0, 0.0]],
            ],
        }
    }

    /// Every range of `self` lies inside the matching range of `outer`.
    pub fn within(&self, outer: &AngleLimits) -> bool {
        self.layers
            .iter()
            .flatten()
            .zip(outer.layers.iter().flatten())
            .all(|(a, b)| b[0] <= a[0] && a[1] <= b[1])
    }

    pub fn range(&self, layer: usize, component: usize) -> [f64; 2] {
        self.layers[layer - 1][component]
    }

    pub fn clamp(&self, layer: usize, component: usize, value: f64) -> f64 {
        let [lo, hi] = self.range(layer, component);
        value.clamp(lo, hi)
    }
}

/// Fixed hand geometry shared by every pose.
///
/// Units are normalized image units: the camera is orthographic and one unit
/// spans the frame width, so hand geometry, joint xy and depth share a scale.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct HandSkeleton {
    /// Wrist and finger roots of the upright reference hand, wrist at the
    /// origin, fingers along +y.
    pub palm_reference: [Vector3<f64>; PALM_JOINT_COUNT],
    /// `bone_lengths[l - 1][j - 1]` is the bone ending at joint `(l, j)`.
    pub bone_lengths: [[f64; FINGER_COUNT]; 3],
    /// Radius of the palm spheres used when rendering.
    pub palm_radius: f64,
    /// Capsule radius of the bones ending in each finger layer.
    pub bone_radii: [f64; 3],
    #[cfg_attr(feature = "serde", serde(default))]
    pub limits: AngleLimits,
}

impl Default for HandSkeleton {
    fn default() -> Self {
        Self {
            palm_reference: [
                Vector3::new(0.0, 0.0, 0.0),
                Vector3::new(-0.065, 0.06, -0.015),
                Vector3::new(-0.045, 0.17, 0.0),
                Vector3::new(0.0, 0.18, 0.0),
                Vector3::new(0.04, 0.17, 0.0),
                Vector3::new(0.075, 0.15, 0.0),
            ],
            bone_lengths: [
                [0.06, 0.085, 0.095, 0.085, 0.065],
                [0.045, 0.05, 0.06, 0.055, 0.04],
                [0.04, 0.04, 0.045, 0.04, 0.035],
            ],
            palm_radius: 0.03,
            bone_radii: [0.02, 0.018, 0.016],
            limits: AngleLimits::default(),
        }
    }
}

impl HandSkeleton {
    pub fn validate(&self) -> Result<()> {
        if self.palm_reference[WRIST].norm() != 0.0 {
            return Err(Error::InvalidParameter(
                "wrist must be at the origin".into(),
            ));
        }
        for j in 1..PALM_JOINT_COUNT {
            let root = self.palm_reference[j];
            if root.norm() <= 0.0 || Rotation3::rotation_between(&Vector3::y(), &root).is_none() {
                return Err(Error::InvalidParameter(format!(
                    "finger root {j} must be away from the wrist and not point along -y"
                )));
            }
        }
        if self.bone_lengths.iter().flatten().any(|&l| !(l > 0.0)) {
            return Err(Error::InvalidParameter(
                "bone lengths must be positive".into(),
            ));
        }
        if !(self.palm_radius > 0.0) || self.bone_radii.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::InvalidParameter("radii must be positive".into()));
        }
        for layer in &self.limits.layers {
            for [lo, hi] in layer {
                if !(lo <= hi) || *lo <= -core::f64::consts::PI || *hi > core::f64::consts::PI {
                    return Err(Error::InvalidParameter(format!(
                        "bad angle range [{lo}, {hi}]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Length of the bone ending at joint `(layer, j)`, `layer >= 1`.
    pub fn bone_length(&self, layer: usize, j: usize) -> f64 {
        self.bone_lengths[layer - 1][j - 1]
    }

    /// Rest orientation of the wrist-to-root bone of finger `j` (1-based):
    /// the minimal rotation taking +y onto the root direction.
    pub fn rest_frame(&self, j: usize) -> Rotation3<f64> {
        Rotation3::rotation_between(&Vector3::y(), &self.palm_reference[j])
            .unwrap_or_else(Rotation3::identity)
    }

    /// Wrist to middle fingertip distance of the straight reference hand.
    pub fn hand_span(&self) -> f64 {
        self.palm_reference[MIDDLE_ROOT].norm()
            + self
                .bone_lengths
                .iter()
                .map(|l| l[MIDDLE_ROOT - 1])
                .sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_index_is_a_bijection() {
        let mut seen = [false; JOINT_COUNT];
        for layer in 0..LAYER_COUNT {
            for j in layer_joint_range(layer) {
                let k = flat_index(layer, j).unwrap();
                assert!(!seen[k]);
                seen[k] = true;
                assert_eq!(layer_joint(k), Some((layer, j)));
            }
        }
        assert!(seen.iter().all(|&s| s));
        assert_eq!(flat_index(1, 0), None);
        assert_eq!(flat_index(0, 6), None);
        assert_eq!(flat_index(4, 1), None);
        assert_eq!(layer_joint(21), None);
    }

    #[test]
    fn default_skeleton_is_valid() {
        let s = HandSkeleton::default();
        s.validate().unwrap();
        assert_eq!(s.palm_reference[WRIST], Vector3::zeros());
        assert!((s.hand_span() - 0.38).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_positive_bone() {
        let mut s = HandSkeleton::default();
        s.bone_lengths[1][2] = 0.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn rest_frame_points_at_root() {
        let s = HandSkeleton::default();
        for j in 1..6 {
            let dir = s.rest_frame(j) * Vector3::y();
            let expect = s.palm_reference[j].normalize();
            assert!((dir - expect).norm() < 1e-12);
        }
    }
}
