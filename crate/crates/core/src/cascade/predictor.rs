use alloc::{vec, vec::Vec};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::spatial::RasterGrid;
use crate::{Error, Result};

/// Shape of the patch stack a predictor consumes: one `width x height` patch
/// per pyramid level.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PatchGeometry {
    pub levels: usize,
    pub width: usize,
    pub height: usize,
}

impl PatchGeometry {
    pub fn feature_len(&self) -> usize {
        self.levels * self.width * self.height
    }

    pub fn check(&self, patches: &[RasterGrid]) -> Result<()> {
        if patches.len() != self.levels
            || patches
                .iter()
                .any(|p| p.width() != self.width || p.height() != self.height)
        {
            return Err(Error::DimensionMismatch(alloc::format!(
                "predictor expects {} patches of {}x{}",
                self.levels,
                self.width,
                self.height
            )));
        }
        Ok(())
    }
}

/// A trainable map from a patch stack to a fixed-length vector of per-joint
/// `(x, y, z)` values.
pub trait Predictor {
    fn geometry(&self) -> PatchGeometry;

    /// Number of outputs; three per joint.
    fn output_len(&self) -> usize;

    /// Prediction from the flattened, level-major patch values.
    fn predict_features(&self, features: &[f64]) -> Vec<f64>;

    fn predict(&self, patches: &[RasterGrid]) -> Result<Vec<f64>> {
        self.geometry().check(patches)?;
        let mut features = Vec::with_capacity(self.geometry().feature_len());
        for p in patches {
            features.extend_from_slice(p.values());
        }
        Ok(self.predict_features(&features))
    }
}

/// Always predicts zeros; a residual stage built from it is a fixed point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZeroPredictor {
    pub geometry: PatchGeometry,
    pub outputs: usize,
}

impl Predictor for ZeroPredictor {
    fn geometry(&self) -> PatchGeometry {
        self.geometry
    }

    fn output_len(&self) -> usize {
        self.outputs
    }

    fn predict_features(&self, _features: &[f64]) -> Vec<f64> {
        vec![0.0; self.outputs]
    }
}
