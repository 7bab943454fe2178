use core::f64::consts::PI;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::skeleton::FINGER_COUNT;
use crate::{Error, Result};

/// Intrinsic Z, X, Y rotation angles (radians) of a bone relative to its
/// parent bone frame. Z swings the bone sideways, X bends it, Y twists it.
pub type EulerZxy = [f64; 3];

/// Bone rotations of the five fingers in one layer.
pub type LayerAngles = [EulerZxy; FINGER_COUNT];

const UNIT_TOLERANCE: f64 = 1e-9;

/// Global rigid pose of the palm: the layer-0 partial pose.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct GlobalPose {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl GlobalPose {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a pose from a raw quaternion, rejecting it unless it is unit
    /// length within 1e-9.
    pub fn from_quaternion(q: Quaternion<f64>, translation: Vector3<f64>) -> Result<Self> {
        let norm = q.norm();
        if (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::NonUnitQuaternion(norm));
        }
        Ok(Self {
            rotation: UnitQuaternion::new_unchecked(q),
            translation,
        })
    }

    /// Same rotation with a non-negative scalar component.
    pub fn canonical(&self) -> Self {
        let q = self.rotation.quaternion();
        let rotation = if q.w < 0.0 {
            UnitQuaternion::new_unchecked(-*q)
        } else {
            self.rotation
        };
        Self {
            rotation,
            translation: self.translation,
        }
    }

    /// `[w, x, y, z, tx, ty, tz]`.
    pub fn to_vector(&self) -> [f64; 7] {
        let q = self.rotation.quaternion();
        let t = self.translation;
        [q.w, q.i, q.j, q.k, t.x, t.y, t.z]
    }

    /// Inverse of [`GlobalPose::to_vector`]; the quaternion part is normalized.
    pub fn from_vector(v: &[f64; 7]) -> Self {
        let q = Quaternion::new(v[0], v[1], v[2], v[3]);
        Self {
            rotation: UnitQuaternion::from_quaternion(q),
            translation: Vector3::new(v[4], v[5], v[6]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let norm = self.rotation.quaternion().norm();
        if (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::NonUnitQuaternion(norm));
        }
        Ok(())
    }
}

/// Full 51-DoF hand pose: the global pose plus bone rotations for layers 1 to 3.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PoseParams {
    pub global: GlobalPose,
    /// `layer_angles[l - 1]` holds layer `l`.
    pub layer_angles: [LayerAngles; 3],
}

impl PoseParams {
    pub fn identity() -> Self {
        Self {
            global: GlobalPose::identity(),
            layer_angles: [[[0.0; 3]; FINGER_COUNT]; 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.global.validate()?;
        for &a in self.layer_angles.iter().flatten().flatten() {
            if !(a > -PI && a <= PI) {
                return Err(Error::AngleOutOfRange(a));
            }
        }
        Ok(())
    }

    pub fn angles(&self, layer: usize) -> &LayerAngles {
        &self.layer_angles[layer - 1]
    }

    /// Number of scalar degrees of freedom.
    pub const DOF: usize = 6 + 3 * 3 * FINGER_COUNT;
}
