use alloc::vec::Vec;

use nalgebra::Vector3;
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::math::floor;
use crate::spatial::RasterGrid;
use crate::{Error, Result};

/// Orthographic camera looking down +z.
///
/// Model units are normalized image units, so a point `(x, y, z)` projects
/// to normalized image position `(x, y)` with depth `z`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Camera {
    pub width: usize,
    pub height: usize,
    /// Depth written where no geometry is hit.
    pub background_depth: f64,
}

impl Default for Camera {
    fn default() -> Self {
        Self {
            width: 96,
            height: 96,
            background_depth: 2.0,
        }
    }
}

impl Camera {
    /// Pixel containing a normalized image point, if inside the frame.
    pub fn pixel_of(&self, p: &Vector3<f64>) -> Option<(usize, usize)> {
        let px = floor(p.x * self.width as f64);
        let py = floor(p.y * self.height as f64);
        if px >= 0.0 && py >= 0.0 && px < self.width as f64 && py < self.height as f64 {
            Some((px as usize, py as usize))
        } else {
            None
        }
    }
}

/// Depth image with its hand silhouette.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthFrame {
    depth: RasterGrid,
    mask: Vec<bool>,
    camera: Camera,
}

impl DepthFrame {
    /// Wraps a depth grid; the silhouette is every pixel nearer than the
    /// background.
    pub fn from_depth(depth: RasterGrid, camera: Camera) -> Result<Self> {
        if depth.width() != camera.width || depth.height() != camera.height {
            return Err(Error::DimensionMismatch(alloc::format!(
                "depth grid {}x{} does not match camera {}x{}",
                depth.width(),
                depth.height(),
                camera.width,
                camera.height
            )));
        }
        let mask = depth
            .values()
            .iter()
            .map(|&d| d < camera.background_depth)
            .collect();
        Ok(Self {
            depth,
            mask,
            camera,
        })
    }

    pub fn depth(&self) -> &RasterGrid {
        &self.depth
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn camera(&self) -> &Camera {
        &self.camera
    }

    pub fn width(&self) -> usize {
        self.camera.width
    }

    pub fn height(&self) -> usize {
        self.camera.height
    }

    pub fn is_hand(&self, x: usize, y: usize) -> bool {
        self.mask[y * self.camera.width + x]
    }

    /// Depths of all silhouette pixels, in row-major order.
    pub fn hand_depths(&self) -> Vec<f64> {
        self.depth
            .values()
            .iter()
            .zip(&self.mask)
            .filter_map(|(&d, &m)| m.then_some(d))
            .collect()
    }

    /// Median silhouette depth, or `None` for an empty silhouette.
    pub fn median_hand_depth(&self) -> Option<f64> {
        let mut d = self.hand_depths();
        if d.is_empty() {
            return None;
        }
        d.sort_by(f64::total_cmp);
        Some(d[d.len() / 2])
    }
}
