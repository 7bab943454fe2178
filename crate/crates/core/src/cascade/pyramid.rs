use alloc::vec::Vec;

use nalgebra::Vector2;

use crate::spatial::{GridFrame, RasterGrid};
use crate::{Error, Result};

/// The grid followed by one average-pooled copy per factor.
///
/// Pooled levels take the mean of each `f x f` block. A remainder row or
/// column that does not fill a block is dropped and the level's
/// [`GridFrame`] records the shrink, so normalized image coordinates stay
/// valid on every level.
pub fn build_pyramid(grid: &RasterGrid, factors: &[usize]) -> Result<Vec<RasterGrid>> {
    let mut levels = Vec::with_capacity(factors.len() + 1);
    levels.push(grid.clone());
    for &f in factors {
        if f == 0 || f > grid.width() || f > grid.height() {
            return Err(Error::FrameTooSmall {
                width: grid.width(),
                height: grid.height(),
                factor: f,
            });
        }
        let (w, h) = (grid.width() / f, grid.height() / f);
        let inv = 1.0 / (f * f) as f64;
        let level = RasterGrid::from_fn(w, h, grid.fill(), |x, y| {
            let mut acc = 0.0;
            for dy in 0..f {
                for dx in 0..f {
                    acc += grid.get(x * f + dx, y * f + dy);
                }
            }
            acc * inv
        })?;
        let frame = GridFrame {
            scale: Vector2::new(
                (w * f) as f64 / grid.width() as f64,
                (h * f) as f64 / grid.height() as f64,
            ),
            offset: Vector2::zeros(),
        };
        levels.push(level.with_frame(frame));
    }
    Ok(levels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_sizes() {
        let g = RasterGrid::filled(96, 96, 1.0, 2.0).unwrap();
        let p = build_pyramid(&g, &[2, 4]).unwrap();
        let dims: Vec<_> = p.iter().map(|l| (l.width(), l.height())).collect();
        assert_eq!(dims, [(96, 96), (48, 48), (24, 24)]);
        assert!(p.iter().all(|l| l.frame().is_identity()));
    }

    #[test]
    fn constant_stays_constant() {
        let g = RasterGrid::filled(96, 96, 1.25, 2.0).unwrap();
        for level in build_pyramid(&g, &[2, 4]).unwrap() {
            assert!(level.values().iter().all(|&v| v == 1.25));
            assert_eq!(level.fill(), 2.0);
        }
    }

    #[test]
    fn gradient_pools_to_block_centers() {
        let g = RasterGrid::from_fn(96, 96, 0.0, |x, y| 0.01 * x as f64 - 0.02 * y as f64 + 1.0)
            .unwrap();
        let p = build_pyramid(&g, &[2, 4]).unwrap();
        for (level, f) in p[1..].iter().zip([2usize, 4]) {
            for y in 0..level.height() {
                for x in 0..level.width() {
                    // mean of a linear field over a block is its value at the block center
                    let cx = (x * f) as f64 + (f as f64 - 1.0) / 2.0;
                    let cy = (y * f) as f64 + (f as f64 - 1.0) / 2.0;
                    let expect = 0.01 * cx - 0.02 * cy + 1.0;
                    assert!((level.get(x, y) - expect).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn factor_larger_than_frame_is_an_error() {
        let g = RasterGrid::filled(3, 3, 0.0, 0.0).unwrap();
        assert!(matches!(
            build_pyramid(&g, &[4]),
            Err(Error::FrameTooSmall { factor: 4, .. })
        ));
    }

    #[test]
    fn uneven_level_records_its_footprint() {
        let g = RasterGrid::from_fn(10, 10, 0.0, |x, _| x as f64).unwrap();
        let p = build_pyramid(&g, &[4]).unwrap();
        assert_eq!(p[1].width(), 2);
        assert!((p[1].frame().scale.x - 0.8).abs() < 1e-15);
        // normalized x = 0.2 is original pixel 1.5, the center of the first block
        let v = p[1].sample_normalized(
            Vector2::new(0.2, 0.2),
            crate::spatial::Interpolation::Bilinear,
        );
        assert!((v - 1.5).abs() < 1e-12);
    }
}
