use alloc::{format, vec, vec::Vec};

use nalgebra::Vector3;
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::skeleton::{flat_index, layer_joint_range, layer_len, LAYER_COUNT};
use crate::{Error, Result};

/// A subset of the four hierarchy layers, stored as a bitmask.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct LayerSet(u8);

impl LayerSet {
    pub const ALL: LayerSet = LayerSet(0b1111);

    pub fn single(layer: usize) -> Self {
        assert!(layer < LAYER_COUNT, "layer {layer} out of range");
        LayerSet(1 << layer)
    }

    /// Layers `0..=layer`.
    pub fn up_to(layer: usize) -> Self {
        assert!(layer < LAYER_COUNT, "layer {layer} out of range");
        LayerSet((1u8 << (layer + 1)) - 1)
    }

    pub fn contains(self, layer: usize) -> bool {
        layer < LAYER_COUNT && self.0 & (1 << layer) != 0
    }

    pub fn layers(self) -> impl Iterator<Item = usize> {
        (0..LAYER_COUNT).filter(move |&l| self.contains(l))
    }

    pub fn joint_count(self) -> usize {
        self.layers().map(layer_len).sum()
    }

    /// Offset of `layer`'s first joint in a container holding this set.
    fn offset(self, layer: usize) -> usize {
        (0..layer)
            .filter(|&l| self.contains(l))
            .map(layer_len)
            .sum()
    }
}

/// 3D joint positions for a set of layers.
///
/// `x` and `y` are normalized image coordinates (origin top-left, y down) and
/// `z` is depth in the same units. Joints are stored in flat-index order,
/// restricted to the declared layers.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct JointLocations {
    layers: LayerSet,
    points: Vec<Vector3<f64>>,
    valid: Vec<bool>,
}

impl JointLocations {
    pub fn new(layers: LayerSet, points: Vec<Vector3<f64>>) -> Result<Self> {
        let valid = vec![true; points.len()];
        Self::with_validity(layers, points, valid)
    }

    pub fn with_validity(
        layers: LayerSet,
        points: Vec<Vector3<f64>>,
        valid: Vec<bool>,
    ) -> Result<Self> {
        let expected = layers.joint_count();
        if points.len() != expected || valid.len() != expected {
            return Err(Error::JointSetMismatch(format!(
                "expected {expected} joints, got {} points and {} flags",
                points.len(),
                valid.len()
            )));
        }
        Ok(Self {
            layers,
            points,
            valid,
        })
    }

    /// All 21 joints.
    pub fn full(points: Vec<Vector3<f64>>) -> Result<Self> {
        Self::new(LayerSet::ALL, points)
    }

    pub fn from_layer(layer: usize, points: &[Vector3<f64>]) -> Result<Self> {
        Self::new(LayerSet::single(layer), points.to_vec())
    }

    pub fn layers(&self) -> LayerSet {
        self.layers
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn points_mut(&mut self) -> &mut [Vector3<f64>] {
        &mut self.points
    }

    pub fn validity(&self) -> &[bool] {
        &self.valid
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn position(&self, layer: usize, j: usize) -> Option<usize> {
        if !self.layers.contains(layer) || !layer_joint_range(layer).contains(&j) {
            return None;
        }
        let first = layer_joint_range(layer).start;
        Some(self.layers.offset(layer) + j - first)
    }

    pub fn get(&self, layer: usize, j: usize) -> Option<Vector3<f64>> {
        self.position(layer, j).map(|k| self.points[k])
    }

    pub fn is_valid(&self, layer: usize, j: usize) -> bool {
        self.position(layer, j).is_some_and(|k| self.valid[k])
    }

    pub fn set(&mut self, layer: usize, j: usize, p: Vector3<f64>) -> Result<()> {
        let k = self
            .position(layer, j)
            .ok_or(Error::InvalidJoint { layer, joint: j })?;
        self.points[k] = p;
        Ok(())
    }

    pub fn set_valid(&mut self, layer: usize, j: usize, valid: bool) -> Result<()> {
        let k = self
            .position(layer, j)
            .ok_or(Error::InvalidJoint { layer, joint: j })?;
        self.valid[k] = valid;
        Ok(())
    }

    /// Joints of one layer, in `j` order.
    pub fn layer(&self, layer: usize) -> Option<&[Vector3<f64>]> {
        if !self.layers.contains(layer) {
            return None;
        }
        let start = self.layers.offset(layer);
        Some(&self.points[start..start + layer_len(layer)])
    }

    pub fn layer_valid(&self, layer: usize) -> Option<&[bool]> {
        if !self.layers.contains(layer) {
            return None;
        }
        let start = self.layers.offset(layer);
        Some(&self.valid[start..start + layer_len(layer)])
    }

    /// Copy restricted to `layers`, which must be a subset of this set.
    pub fn restrict(&self, layers: LayerSet) -> Result<Self> {
        let mut points = Vec::with_capacity(layers.joint_count());
        let mut valid = Vec::with_capacity(layers.joint_count());
        for l in layers.layers() {
            points.extend_from_slice(
                self.layer(l)
                    .ok_or(Error::JointSetMismatch(format!("layer {l} missing")))?,
            );
            valid.extend_from_slice(self.layer_valid(l).unwrap_or(&[]));
        }
        Self::with_validity(layers, points, valid)
    }

    /// Iterates `(layer, j, point)` in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Vector3<f64>)> + '_ {
        self.layers
            .layers()
            .flat_map(|l| layer_joint_range(l).map(move |j| (l, j)))
            .zip(self.points.iter())
            .map(|((l, j), p)| (l, j, *p))
    }

    /// Flat indices (0..21) of the stored joints, in storage order.
    pub fn flat_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.iter().filter_map(|(l, j, _)| flat_index(l, j))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layer_set_counts() {
        assert_eq!(LayerSet::ALL.joint_count(), 21);
        assert_eq!(LayerSet::single(0).joint_count(), 6);
        assert_eq!(LayerSet::single(2).joint_count(), 5);
        assert_eq!(LayerSet::up_to(1).joint_count(), 11);
    }

    #[test]
    fn rejects_wrong_joint_count() {
        let pts = vec![Vector3::zeros(); 20];
        assert!(matches!(
            JointLocations::full(pts),
            Err(Error::JointSetMismatch(_))
        ));
    }

    #[test]
    fn accessors_follow_flat_order() {
        let pts: Vec<_> = (0..21).map(|k| Vector3::new(k as f64, 0.0, 0.0)).collect();
        let joints = JointLocations::full(pts).unwrap();
        assert_eq!(joints.get(0, 3).unwrap().x, 3.0);
        assert_eq!(joints.get(2, 1).unwrap().x, 11.0);
        assert_eq!(joints.layer(3).unwrap()[4].x, 20.0);
        assert!(joints.get(1, 0).is_none());

        let sub = joints.restrict(LayerSet::single(2)).unwrap();
        assert_eq!(sub.get(2, 5).unwrap().x, 15.0);
        assert!(sub.get(0, 0).is_none());
        let flat: Vec<_> = sub.flat_indices().collect();
        assert_eq!(flat, (11..16).collect::<Vec<_>>());
    }
}
