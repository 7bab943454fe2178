use alloc::{vec, vec::Vec};

use nalgebra::{Vector2, Vector3};
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::features::{extract_patches, global_patches, reference_depth};
use super::predictor::{PatchGeometry, Predictor};
use super::pyramid::build_pyramid;
use super::ridge::{RidgeConfig, RidgePredictor};
use crate::hand::{
    JointLocations, LayerSet, FINGER_COUNT, JOINT_COUNT, MIDDLE_ROOT, PALM_JOINT_COUNT, WRIST,
};
use crate::spatial::{compute_rotation, AffineTransform2D, RasterGrid};
use crate::synth::DepthFrame;
use crate::{Error, Result};

/// Cascade layout and feature settings.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct CascadeConfig {
    /// Refinement stages after the initial regressor, per layer.
    pub stages_per_layer: [usize; 4],
    /// Downsampling factors of the extra pyramid levels.
    pub pyramid_factors: Vec<usize>,
    /// Side length of every resampled patch, pixels.
    pub patch_size: usize,
    /// Patch depths are recentered on the attended joint and clamped to
    /// this magnitude.
    pub depth_clamp: f64,
    pub ridge: RidgeConfig,
    /// Train finger layers on predicted parents rather than ground truth.
    pub parents_from_predictions: bool,
    /// With two or more folds, every stage trains on estimates made by
    /// models that did not see the sample; otherwise on in-sample estimates.
    pub parent_folds: usize,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            stages_per_layer: [1, 0, 0, 0],
            pyramid_factors: vec![2, 4],
            patch_size: 16,
            depth_clamp: 0.2,
            ridge: RidgeConfig::default(),
            parents_from_predictions: true,
            parent_folds: 0,
        }
    }
}

impl CascadeConfig {
    pub fn geometry(&self) -> PatchGeometry {
        PatchGeometry {
            levels: self.pyramid_factors.len() + 1,
            width: self.patch_size,
            height: self.patch_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 {
            return Err(Error::InvalidParameter("patch size must be >= 1".into()));
        }
        if !(self.depth_clamp > 0.0) {
            return Err(Error::InvalidParameter(
                "depth clamp must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A predictor together with the crop ratio of the patches it reads.
#[derive(Clone, Debug, PartialEq)]
pub struct StageUnit<P> {
    pub predictor: P,
    pub crop_ratio: f64,
}

/// Regressors of one finger layer: one initial offset regressor per finger
/// plus refinement stages.
#[derive(Clone, Debug, PartialEq)]
pub struct FingerLayerModel<P> {
    pub initial: Vec<StageUnit<P>>,
    pub stages: Vec<Vec<StageUnit<P>>>,
}

/// Every regressor of a trained pipeline.
#[derive(Clone, Debug, PartialEq)]
pub struct CascadeModel<P = RidgePredictor> {
    pub config: CascadeConfig,
    /// Baseline regressing all 21 joints at once from the whole frame.
    pub holistic: P,
    /// Regresses the six palm joints jointly from the whole frame.
    pub layer0_initial: P,
    /// `layer0_stages[k][j]` refines palm joint `j` in stage `k + 1`.
    pub layer0_stages: Vec<Vec<StageUnit<P>>>,
    /// Layers 1 to 3.
    pub finger_layers: Vec<FingerLayerModel<P>>,
}

impl<P> CascadeModel<P> {
    /// Crop ratios as `(layer, stage, joint, b)`; stage 0 is the initial
    /// regressor.
    pub fn crop_ratios(&self) -> Vec<(usize, usize, usize, f64)> {
        let mut out = Vec::new();
        for (k, units) in self.layer0_stages.iter().enumerate() {
            for (j, u) in units.iter().enumerate() {
                out.push((0, k + 1, j, u.crop_ratio));
            }
        }
        for (l, layer) in self.finger_layers.iter().enumerate() {
            for (f, u) in layer.initial.iter().enumerate() {
                out.push((l + 1, 0, f + 1, u.crop_ratio));
            }
            for (k, units) in layer.stages.iter().enumerate() {
                for (f, u) in units.iter().enumerate() {
                    out.push((l + 1, k + 1, f + 1, u.crop_ratio));
                }
            }
        }
        out
    }
}

/// Estimates of one stage, for diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct StageRecord {
    pub layer: usize,
    /// 0 is the initial regressor.
    pub stage: usize,
    pub joints: Vec<Vector3<f64>>,
}

/// Per-frame state of hierarchical inference.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineState {
    theta: f64,
    theta_frozen: bool,
    estimates: Vec<Vector3<f64>>,
    valid: Vec<bool>,
    stages: Vec<StageRecord>,
    transforms: Vec<(usize, usize, usize, AffineTransform2D)>,
}

impl Default for PipelineState {
    fn default() -> Self {
        Self::new()
    }
}

impl PipelineState {
    pub fn new() -> Self {
        Self {
            theta: 0.0,
            theta_frozen: false,
            estimates: vec![Vector3::zeros(); JOINT_COUNT],
            valid: vec![false; JOINT_COUNT],
            stages: Vec::new(),
            transforms: Vec::new(),
        }
    }

    /// In-plane rotation; fixed once layer 0 is complete.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn theta_frozen(&self) -> bool {
        self.theta_frozen
    }

    fn set_theta(&mut self, theta: f64) {
        assert!(
            !self.theta_frozen,
            "theta is only updated while processing layer 0"
        );
        self.theta = theta;
    }

    fn freeze_theta(&mut self) {
        self.theta_frozen = true;
    }

    /// Current estimates of all 21 joints; joints not yet estimated are
    /// marked invalid.
    pub fn estimates(&self) -> JointLocations {
        JointLocations::with_validity(LayerSet::ALL, self.estimates.clone(), self.valid.clone())
            .expect("21 joints")
    }

    pub fn stage_log(&self) -> &[StageRecord] {
        &self.stages
    }

    /// Attention transforms used, as `(layer, stage, joint, transform)`.
    pub fn transforms(&self) -> &[(usize, usize, usize, AffineTransform2D)] {
        &self.transforms
    }

    fn store_layer(&mut self, layer: usize, joints: &[Vector3<f64>], valid: &[bool]) {
        let start = if layer == 0 {
            0
        } else {
            PALM_JOINT_COUNT + FINGER_COUNT * (layer - 1)
        };
        self.estimates[start..start + joints.len()].copy_from_slice(joints);
        self.valid[start..start + valid.len()].copy_from_slice(valid);
    }

    fn record(&mut self, layer: usize, stage: usize, joints: &[Vector3<f64>]) {
        self.stages.push(StageRecord {
            layer,
            stage,
            joints: joints.to_vec(),
        });
    }
}

/// Post-processing run on each layer's discriminative estimate before the
/// next layer consumes it.
pub trait LayerRefiner {
    fn refine_layer(
        &mut self,
        layer: usize,
        estimate: &[Vector3<f64>],
        frame: &DepthFrame,
    ) -> Result<Vec<Vector3<f64>>>;
}

/// Pyramid and reference depth of one frame.
pub(crate) struct FrameInput {
    pub pyramid: Vec<RasterGrid>,
    pub z_ref: f64,
}

impl FrameInput {
    pub fn new(frame: &DepthFrame, config: &CascadeConfig) -> Result<Self> {
        Ok(Self {
            pyramid: build_pyramid(frame.depth(), &config.pyramid_factors)?,
            z_ref: reference_depth(frame),
        })
    }
}

fn xy(p: &Vector3<f64>) -> Vector2<f64> {
    Vector2::new(p.x, p.y)
}

/// One residual refinement of a single joint.
///
/// Builds `T = (theta_prev, xy(s_prev), b)`, resamples the pyramid through
/// it (without the rotation when `rotate_features` is false), moves
/// `s_prev` into patch space, adds the predicted residual and maps the sum
/// back. Depth is handled additively. Returns the new estimate and `T`.
pub fn refine_stage(
    predictor: &dyn Predictor,
    pyramid: &[RasterGrid],
    s_prev: Vector3<f64>,
    theta_prev: f64,
    b: f64,
    rotate_features: bool,
    depth_clamp: f64,
) -> Result<(Vector3<f64>, AffineTransform2D)> {
    if predictor.output_len() != 3 {
        return Err(Error::DimensionMismatch(alloc::format!(
            "stage predictor emits {} values, expected 3",
            predictor.output_len()
        )));
    }
    let label_t = AffineTransform2D::new(theta_prev, xy(&s_prev), b)?;
    let feature_t = if rotate_features {
        label_t
    } else {
        AffineTransform2D::new(0.0, xy(&s_prev), b)?
    };
    let patches = extract_patches(
        pyramid,
        &feature_t,
        predictor.geometry(),
        s_prev.z,
        depth_clamp,
    )?;
    let r = predictor.predict(&patches)?;
    let moved = label_t.unmap_point(xy(&s_prev)) + Vector2::new(r[0], r[1]);
    let back = label_t.map_point(moved);
    Ok((Vector3::new(back.x, back.y, s_prev.z + r[2]), label_t))
}

fn theta_of(palm: &[Vector3<f64>], fallback: f64) -> f64 {
    compute_rotation(xy(&palm[WRIST]), xy(&palm[MIDDLE_ROOT])).unwrap_or(fallback)
}

pub(crate) fn initial_palm(
    predictor: &dyn Predictor,
    input: &FrameInput,
    depth_clamp: f64,
) -> Result<[Vector3<f64>; PALM_JOINT_COUNT]> {
    if predictor.output_len() != 3 * PALM_JOINT_COUNT {
        return Err(Error::DimensionMismatch(
            "layer-0 initializer must emit 18 values".into(),
        ));
    }
    let patches = global_patches(
        &input.pyramid,
        predictor.geometry(),
        input.z_ref,
        depth_clamp,
    )?;
    let out = predictor.predict(&patches)?;
    Ok(core::array::from_fn(|j| {
        Vector3::new(out[3 * j], out[3 * j + 1], out[3 * j + 2] + input.z_ref)
    }))
}

/// Layer 0: joint initial regression of the six palm joints followed by
/// per-joint refinement stages. The rotation is recomputed from the wrist
/// and middle root before the first stage and after every stage.
pub fn run_layer0<P: Predictor>(
    frame: &DepthFrame,
    model: &CascadeModel<P>,
    state: &mut PipelineState,
) -> Result<[Vector3<f64>; PALM_JOINT_COUNT]> {
    let input = FrameInput::new(frame, &model.config)?;
    run_layer0_with(&input, model, state)
}

pub(crate) fn run_layer0_with<P: Predictor>(
    input: &FrameInput,
    model: &CascadeModel<P>,
    state: &mut PipelineState,
) -> Result<[Vector3<f64>; PALM_JOINT_COUNT]> {
    let clamp = model.config.depth_clamp;
    let mut palm = initial_palm(&model.layer0_initial, input, clamp)?;
    state.record(0, 0, &palm);
    state.set_theta(theta_of(&palm, 0.0));
    for (k, units) in model.layer0_stages.iter().enumerate() {
        if units.len() != PALM_JOINT_COUNT {
            return Err(Error::DimensionMismatch(
                "layer-0 stage needs six units".into(),
            ));
        }
        let theta = state.theta();
        let mut next = palm;
        for (j, unit) in units.iter().enumerate() {
            let (s, t) = refine_stage(
                &unit.predictor,
                &input.pyramid,
                palm[j],
                theta,
                unit.crop_ratio,
                true,
                clamp,
            )?;
            next[j] = s;
            state.transforms.push((0, k + 1, j, t));
        }
        palm = next;
        state.record(0, k + 1, &palm);
        state.set_theta(theta_of(&palm, theta));
    }
    state.store_layer(0, &palm, &[true; PALM_JOINT_COUNT]);
    Ok(palm)
}

/// Finger layer `layer` (1..=3): per finger, an initial offset from the
/// parent joint in the rotated patch centered on the parent, then the
/// refinement stages with translation-only feature transforms. Fingers with
/// an invalid or non-finite parent are skipped and marked invalid.
pub fn run_layer<P: Predictor>(
    frame: &DepthFrame,
    layer: usize,
    parents: &[Vector3<f64>; FINGER_COUNT],
    parent_valid: &[bool; FINGER_COUNT],
    model: &CascadeModel<P>,
    state: &mut PipelineState,
) -> Result<([Vector3<f64>; FINGER_COUNT], [bool; FINGER_COUNT])> {
    let input = FrameInput::new(frame, &model.config)?;
    run_layer_with(&input, layer, parents, parent_valid, model, state)
}

pub(crate) fn run_layer_with<P: Predictor>(
    input: &FrameInput,
    layer: usize,
    parents: &[Vector3<f64>; FINGER_COUNT],
    parent_valid: &[bool; FINGER_COUNT],
    model: &CascadeModel<P>,
    state: &mut PipelineState,
) -> Result<([Vector3<f64>; FINGER_COUNT], [bool; FINGER_COUNT])> {
    if !(1..=3).contains(&layer) {
        return Err(Error::InvalidParameter(alloc::format!(
            "finger layer {layer}"
        )));
    }
    let lm = model
        .finger_layers
        .get(layer - 1)
        .ok_or_else(|| Error::InvalidParameter(alloc::format!("no model for layer {layer}")))?;
    if lm.initial.len() != FINGER_COUNT || lm.stages.iter().any(|s| s.len() != FINGER_COUNT) {
        return Err(Error::DimensionMismatch(
            "finger layer needs five units per stage".into(),
        ));
    }
    let clamp = model.config.depth_clamp;
    let theta = state.theta();
    let mut valid: [bool; FINGER_COUNT] =
        core::array::from_fn(|f| parent_valid[f] && parents[f].iter().all(|c| c.is_finite()));
    let mut joints = *parents;
    for f in 0..FINGER_COUNT {
        if !valid[f] {
            continue;
        }
        let unit = &lm.initial[f];
        if unit.predictor.output_len() != 3 {
            return Err(Error::DimensionMismatch(
                "finger initializer must emit 3 values".into(),
            ));
        }
        let t = AffineTransform2D::new(theta, xy(&parents[f]), unit.crop_ratio)?;
        let patches = extract_patches(
            &input.pyramid,
            &t,
            unit.predictor.geometry(),
            parents[f].z,
            clamp,
        )?;
        match unit.predictor.predict(&patches) {
            Ok(o) => {
                let p = t.map_point(t.unmap_point(xy(&parents[f])) + Vector2::new(o[0], o[1]));
                joints[f] = Vector3::new(p.x, p.y, parents[f].z + o[2]);
                state.transforms.push((layer, 0, f + 1, t));
            }
            Err(_) => valid[f] = false,
        }
    }
    state.record(layer, 0, &joints);
    for (k, units) in lm.stages.iter().enumerate() {
        for f in 0..FINGER_COUNT {
            if !valid[f] {
                continue;
            }
            let (s, t) = refine_stage(
                &units[f].predictor,
                &input.pyramid,
                joints[f],
                theta,
                units[f].crop_ratio,
                false,
                clamp,
            )?;
            joints[f] = s;
            state.transforms.push((layer, k + 1, f + 1, t));
        }
        state.record(layer, k + 1, &joints);
    }
    state.store_layer(layer, &joints, &valid);
    Ok((joints, valid))
}

/// Hierarchical inference over all four layers. When a refiner is given,
/// each layer's estimate is replaced by the refined one before the next
/// layer uses it as parents.
pub fn infer_hierarchical<P: Predictor>(
    model: &CascadeModel<P>,
    frame: &DepthFrame,
    mut refiner: Option<&mut dyn LayerRefiner>,
) -> Result<PipelineState> {
    let input = FrameInput::new(frame, &model.config)?;
    let mut state = PipelineState::new();
    let mut palm = run_layer0_with(&input, model, &mut state)?;
    state.freeze_theta();
    if let Some(r) = refiner.as_deref_mut() {
        let refined = r.refine_layer(0, &palm, frame)?;
        palm.copy_from_slice(&refined);
        state.store_layer(0, &palm, &[true; PALM_JOINT_COUNT]);
    }
    let mut parents: [Vector3<f64>; FINGER_COUNT] = core::array::from_fn(|f| palm[f + 1]);
    let mut parent_valid = [true; FINGER_COUNT];
    for layer in 1..=3 {
        let (mut joints, valid) =
            run_layer_with(&input, layer, &parents, &parent_valid, model, &mut state)?;
        if let Some(r) = refiner.as_deref_mut() {
            let refined = r.refine_layer(layer, &joints, frame)?;
            joints.copy_from_slice(&refined);
            state.store_layer(layer, &joints, &valid);
        }
        parents = joints;
        parent_valid = valid;
    }
    Ok(state)
}

/// Holistic baseline: all 21 joints regressed at once from the whole frame.
pub fn infer_holistic<P: Predictor>(
    model: &CascadeModel<P>,
    frame: &DepthFrame,
) -> Result<JointLocations> {
    let input = FrameInput::new(frame, &model.config)?;
    let predictor = &model.holistic;
    if predictor.output_len() != 3 * JOINT_COUNT {
        return Err(Error::DimensionMismatch(
            "holistic regressor must emit 63 values".into(),
        ));
    }
    let patches = global_patches(
        &input.pyramid,
        predictor.geometry(),
        input.z_ref,
        model.config.depth_clamp,
    )?;
    let out = predictor.predict(&patches)?;
    let points = (0..JOINT_COUNT)
        .map(|k| Vector3::new(out[3 * k], out[3 * k + 1], out[3 * k + 2] + input.z_ref))
        .collect();
    JointLocations::full(points)
}
