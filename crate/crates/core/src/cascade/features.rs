use alloc::vec::Vec;

use super::predictor::PatchGeometry;
use crate::spatial::{resample, AffineTransform2D, Interpolation, RasterGrid};
use crate::synth::DepthFrame;
use crate::{Error, Result};

/// Depth the whole-frame features are centered on: the median silhouette
/// depth, or the background for an empty silhouette.
pub fn reference_depth(frame: &DepthFrame) -> f64 {
    frame
        .median_hand_depth()
        .unwrap_or(frame.camera().background_depth)
}

/// Resamples every pyramid level through `transform` and recenters depth on
/// `z_ref`, clamping to `[-depth_clamp, depth_clamp]`. Background and
/// out-of-frame pixels saturate at `+depth_clamp`.
pub fn extract_patches(
    pyramid: &[RasterGrid],
    transform: &AffineTransform2D,
    geometry: PatchGeometry,
    z_ref: f64,
    depth_clamp: f64,
) -> Result<Vec<RasterGrid>> {
    if pyramid.len() != geometry.levels {
        return Err(Error::DimensionMismatch(alloc::format!(
            "{} pyramid levels for a {}-level predictor",
            pyramid.len(),
            geometry.levels
        )));
    }
    pyramid
        .iter()
        .map(|level| {
            let mut patch = resample(
                level,
                transform,
                geometry.width,
                geometry.height,
                Interpolation::Bilinear,
            )?;
            for v in patch.values_mut() {
                *v = (*v - z_ref).clamp(-depth_clamp, depth_clamp);
            }
            Ok(patch)
        })
        .collect()
}

/// Whole-frame view of every level, used by the joint layer-0 regressor and
/// the holistic baseline.
pub fn global_patches(
    pyramid: &[RasterGrid],
    geometry: PatchGeometry,
    z_ref: f64,
    depth_clamp: f64,
) -> Result<Vec<RasterGrid>> {
    extract_patches(
        pyramid,
        &AffineTransform2D::full_view(),
        geometry,
        z_ref,
        depth_clamp,
    )
}

pub(crate) fn flatten(patches: &[RasterGrid]) -> Vec<f64> {
    patches
        .iter()
        .flat_map(|p| p.values().iter().copied())
        .collect()
}
