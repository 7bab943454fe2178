use nalgebra::Vector2;

use crate::{Error, Result};

/// Smallest allowed crop ratio for an image `image_width` pixels wide: the
/// patch must cover at least a 4-pixel source window.
pub fn min_crop_ratio(image_width: usize) -> f64 {
    (4.0 / image_width.max(1) as f64).min(1.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CropRatio {
    pub b: f64,
    /// The raw estimate fell outside `[min_crop_ratio, 1]`.
    pub clamped: bool,
}

/// Crop ratio from offsets (or residuals) expressed in the rotated,
/// unscaled (`b = 1`) patch space: twice the larger of the per-axis mean
/// absolute offsets, clamped into `[4 / image_width, 1]`.
///
/// Offsets are already normalized by the image size, so the width only sets
/// the lower clamp.
pub fn estimate_crop_ratio(offsets: &[Vector2<f64>], image_width: usize) -> Result<CropRatio> {
    if offsets.is_empty() {
        return Err(Error::EmptyInput("crop ratio needs at least one offset"));
    }
    let n = offsets.len() as f64;
    let mean_x = offsets.iter().map(|o| o.x.abs()).sum::<f64>() / n;
    let mean_y = offsets.iter().map(|o| o.y.abs()).sum::<f64>() / n;
    let raw = 2.0 * mean_x.max(mean_y);
    let lo = min_crop_ratio(image_width);
    let b = raw.clamp(lo, 1.0);
    Ok(CropRatio {
        b,
        clamped: b != raw,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn symmetric_offsets() {
        let offsets: Vec<_> = [(0.1, 0.05), (-0.1, 0.05), (0.1, -0.05), (-0.1, -0.05)]
            .iter()
            .map(|&(x, y)| Vector2::new(x, y))
            .collect();
        let r = estimate_crop_ratio(&offsets, 96).unwrap();
        assert!((r.b - 0.2).abs() < 1e-15);
        assert!(!r.clamped);
    }

    #[test]
    fn zero_offsets_clamp_to_minimum() {
        let r = estimate_crop_ratio(&[Vector2::zeros(); 5], 96).unwrap();
        assert_eq!(r.b, 4.0 / 96.0);
        assert!(r.clamped);
    }

    #[test]
    fn large_offsets_clamp_to_one() {
        let r = estimate_crop_ratio(&[Vector2::new(0.9, 0.0)], 96).unwrap();
        assert_eq!(r.b, 1.0);
        assert!(r.clamped);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(estimate_crop_ratio(&[], 96).is_err());
    }
}
