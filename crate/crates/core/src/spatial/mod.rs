//! Spatial attention: the rotate-translate-crop affine map between a source
//! grid and an attention patch, bilinear resampling through it, and the crop
//! ratio rule.
//!
//! All coordinates are normalized. Source (image) coordinates run over
//! `[0, 1]^2` with the origin top-left and y down. Patch coordinates are
//! centered: the patch center is the origin and the patch spans
//! `[-0.5, 0.5]^2`, so the attention center maps to the patch center.

mod crop;
mod grid;
mod tensor;
mod transform;

pub use crop::{estimate_crop_ratio, min_crop_ratio, CropRatio};
pub use grid::{resample, GridFrame, Interpolation, RasterGrid};
pub use tensor::{decode_grid, encode_grid, TENSOR_MAGIC, TENSOR_VERSION};
pub use transform::{compute_rotation, transform_points, AffineTransform2D, Direction};
