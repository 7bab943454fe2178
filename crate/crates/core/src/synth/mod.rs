//! Synthetic ground truth: pose sampling, orthographic capsule rendering and
//! dataset generation.

mod frame;
mod render;
mod sampler;

pub use frame::{Camera, DepthFrame};
pub use render::render;
pub use sampler::{generate_dataset, generate_sample, PoseSampler, Sample};
