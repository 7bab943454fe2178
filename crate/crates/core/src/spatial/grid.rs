use alloc::{vec, vec::Vec};

use nalgebra::Vector2;
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::transform::AffineTransform2D;
use crate::math::floor;
use crate::{Error, Result};

/// Fractional pixel offsets closer than this to a pixel center snap onto it.
const SNAP: f64 = 1e-9;

/// Maps a grid's own normalized coordinates onto original-image normalized
/// coordinates: `image = offset + scale * grid`.
///
/// Identity for full frames and for average-pooled levels whose dimensions
/// divide evenly; pooled levels that drop a remainder row or column carry the
/// shrink here.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct GridFrame {
    pub scale: Vector2<f64>,
    pub offset: Vector2<f64>,
}

impl Default for GridFrame {
    fn default() -> Self {
        Self {
            scale: Vector2::new(1.0, 1.0),
            offset: Vector2::zeros(),
        }
    }
}

impl GridFrame {
    pub fn to_grid(&self, image: Vector2<f64>) -> Vector2<f64> {
        (image - self.offset).component_div(&self.scale)
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::default()
    }
}

/// Row-major scalar field with an out-of-bounds fill value.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RasterGrid {
    width: usize,
    height: usize,
    values: Vec<f64>,
    fill: f64,
    frame: GridFrame,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Interpolation {
    #[default]
    Bilinear,
    /// For masks and label maps.
    Nearest,
}

impl RasterGrid {
    pub fn new(width: usize, height: usize, values: Vec<f64>, fill: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(
                "grid dimensions must be >= 1".into(),
            ));
        }
        if values.len() != width * height {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{width}x{height} grid needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        Ok(Self {
            width,
            height,
            values,
            fill,
            frame: GridFrame::default(),
        })
    }

    /// Grid with every pixel set to `value`.
    pub fn filled(width: usize, height: usize, value: f64, fill: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height], fill)
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        fill: f64,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values, fill)
    }

    pub fn with_frame(mut self, frame: GridFrame) -> Self {
        self.frame = frame;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn fill(&self) -> f64 {
        self.fill
    }

    pub fn frame(&self) -> &GridFrame {
        &self.frame
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.values[y * self.width + x] = v;
    }

    /// Bilinear sample at pixel coordinates, where pixel `(x, y)` has its
    /// center at `(x, y)`. Positions inside the grid's footprint
    /// (`[-0.5, w - 0.5]`) clamp to the border pixels; positions outside
    /// return the fill value.
    pub fn sample_bilinear(&self, px: f64, py: f64) -> f64 {
        let (Some((x0, x1, fx)), Some((y0, y1, fy))) =
            (axis_lerp(px, self.width), axis_lerp(py, self.height))
        else {
            return self.fill;
        };
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Nearest-pixel sample with the same footprint rule as
    /// [`RasterGrid::sample_bilinear`].
    pub fn sample_nearest(&self, px: f64, py: f64) -> f64 {
        match (axis_nearest(px, self.width), axis_nearest(py, self.height)) {
            (Some(x), Some(y)) => self.get(x, y),
            _ => self.fill,
        }
    }

    /// Sample at original-image normalized coordinates.
    pub fn sample_normalized(&self, p: Vector2<f64>, interpolation: Interpolation) -> f64 {
        let g = self.frame.to_grid(p);
        let px = g.x * self.width as f64 - 0.5;
        let py = g.y * self.height as f64 - 0.5;
        match interpolation {
            Interpolation::Bilinear => self.sample_bilinear(px, py),
            Interpolation::Nearest => self.sample_nearest(px, py),
        }
    }
}

fn in_footprint(p: f64, n: usize) -> bool {
    p >= -0.5 && p <= n as f64 - 0.5
}

fn axis_lerp(p: f64, n: usize) -> Option<(usize, usize, f64)> {
    if !in_footprint(p, n) {
        return None;
    }
    let p = p.clamp(0.0, (n - 1) as f64);
    let mut i = floor(p);
    let mut f = p - i;
    if f < SNAP {
        f = 0.0;
    } else if f > 1.0 - SNAP {
        f = 0.0;
        i += 1.0;
    }
    let i0 = (i as usize).min(n - 1);
    Some((i0, (i0 + 1).min(n - 1), f))
}

fn axis_nearest(p: f64, n: usize) -> Option<usize> {
    if !in_footprint(p, n) {
        return None;
    }
    Some((floor(p + 0.5).max(0.0) as usize).min(n - 1))
}

/// Resamples `src` into an `out_width x out_height` patch through `transform`.
///
/// Each output pixel center, in centered patch coordinates, is mapped to the
/// source by [`AffineTransform2D::map_point`] and sampled there. The output
/// keeps the source fill value.
pub fn resample(
    src: &RasterGrid,
    transform: &AffineTransform2D,
    out_width: usize,
    out_height: usize,
    interpolation: Interpolation,
) -> Result<RasterGrid> {
    if out_width == 0 || out_height == 0 {
        return Err(Error::InvalidParameter(
            "output dimensions must be >= 1".into(),
        ));
    }
    let mut values = Vec::with_capacity(out_width * out_height);
    for j in 0..out_height {
        let v = (j as f64 + 0.5) / out_height as f64 - 0.5;
        for i in 0..out_width {
            let u = (i as f64 + 0.5) / out_width as f64 - 0.5;
            let p = transform.map_point(Vector2::new(u, v));
            values.push(src.sample_normalized(p, interpolation));
        }
    }
    RasterGrid::new(out_width, out_height, values, src.fill)
}
