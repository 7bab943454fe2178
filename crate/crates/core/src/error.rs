use alloc::string::String;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("quaternion norm {0} is not unit length")]
    NonUnitQuaternion(f64),
    #[error("angle {0} lies outside (-pi, pi]")]
    AngleOutOfRange(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("orientation undefined: wrist and middle-finger root coincide")]
    UndefinedOrientation,
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("joint set mismatch: {0}")]
    JointSetMismatch(String),
    #[error("invalid joint: layer {layer}, joint {joint}")]
    InvalidJoint { layer: usize, joint: usize },
    #[error("frame of {width}x{height} is too small for pyramid factor {factor}")]
    FrameTooSmall {
        width: usize,
        height: usize,
        factor: usize,
    },
    #[error("pose projects entirely outside the frame")]
    OutsideFrame,
    #[error("tensor format: {0}")]
    Tensor(String),
    #[error("linear algebra: {0}")]
    Numerical(String),
}
