//! Hierarchical cascaded regression with spatial attention.
//!
//! Layer 0 is regressed jointly from the whole multi-resolution input and
//! then refined joint by joint in attention patches; the in-plane rotation
//! is re-estimated after every layer-0 stage and frozen afterwards. Finger
//! layers regress offsets from their parent joints in patches centered on
//! the parents and rotated upright.

mod engine;
mod features;
mod predictor;
mod pyramid;
mod ridge;
mod train;

pub use engine::{
    infer_hierarchical, infer_holistic, refine_stage, run_layer, run_layer0, CascadeConfig,
    CascadeModel, FingerLayerModel, LayerRefiner, PipelineState, StageRecord, StageUnit,
};
pub use features::{extract_patches, global_patches, reference_depth};
pub use predictor::{PatchGeometry, Predictor, ZeroPredictor};
pub use pyramid::build_pyramid;
pub use ridge::{fit_ridge, RidgeConfig, RidgePredictor};
pub use train::{
    train_pipeline, train_pipeline_with, Labeled, RefinerFactory, StageError, TrainedCascade,
    TrainingReport,
};
