use alloc::{boxed::Box, vec::Vec};

use nalgebra::{DMatrix, Vector2, Vector3};

use super::engine::{
    infer_hierarchical, CascadeConfig, CascadeModel, FingerLayerModel, FrameInput, LayerRefiner,
    StageUnit,
};
use super::features::{extract_patches, flatten, global_patches};
use super::predictor::{PatchGeometry, Predictor};
use super::ridge::{fit_ridge, RidgePredictor};
use crate::hand::JointLocations;
use crate::hand::{FINGER_COUNT, JOINT_COUNT, MIDDLE_ROOT, PALM_JOINT_COUNT, WRIST};
use crate::spatial::{compute_rotation, estimate_crop_ratio, AffineTransform2D};
use crate::synth::{DepthFrame, Sample};
use crate::{Error, Result};

/// Mean Euclidean training error of one layer after one stage.
#[derive(Clone, Debug, PartialEq)]
pub struct StageError {
    pub layer: usize,
    /// 0 is the initial regressor.
    pub stage: usize,
    pub mean_error: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingReport {
    pub stages: Vec<StageError>,
    /// Mean training error of the holistic baseline over all joints.
    pub holistic_error: f64,
    /// `(layer, stage, joint)` whose crop-ratio estimate hit a clamp bound.
    pub clamped_crops: Vec<(usize, usize, usize)>,
}

/// A depth frame with its ground-truth joints.
pub trait Labeled {
    fn frame(&self) -> &DepthFrame;
    fn joints(&self) -> &JointLocations;
}

impl Labeled for Sample {
    fn frame(&self) -> &DepthFrame {
        &self.frame
    }

    fn joints(&self) -> &JointLocations {
        &self.joints
    }
}

impl Labeled for (DepthFrame, JointLocations) {
    fn frame(&self) -> &DepthFrame {
        &self.0
    }

    fn joints(&self) -> &JointLocations {
        &self.1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedCascade {
    pub model: CascadeModel<RidgePredictor>,
    pub report: TrainingReport,
}

fn xy(p: &Vector3<f64>) -> Vector2<f64> {
    Vector2::new(p.x, p.y)
}

fn theta_of(palm: &[Vector3<f64>], fallback: f64) -> f64 {
    compute_rotation(xy(&palm[WRIST]), xy(&palm[MIDDLE_ROOT])).unwrap_or(fallback)
}

fn mean_error(pred: &[Vec<Vector3<f64>>], truth: &[Vec<Vector3<f64>>]) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (p, t) in pred.iter().zip(truth) {
        for (a, b) in p.iter().zip(t) {
            sum += (a - b).norm();
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

fn design(rows: &[Vec<f64>], d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j])
}

/// Trains one residual unit for joint slot `slot` of every sample, moving
/// `current` to the refined in-sample estimates. `rotate_features` selects
/// whether the feature patch is rotated by `theta` (labels always are).
#[allow(clippy::too_many_arguments)]
fn train_unit(
    inputs: &[FrameInput],
    thetas: &[f64],
    current: &mut [Vector3<f64>],
    truth: &[Vector3<f64>],
    anchor: &[Vector3<f64>],
    rotate_features: bool,
    geometry: PatchGeometry,
    config: &CascadeConfig,
    image_width: usize,
) -> Result<(StageUnit<RidgePredictor>, bool)> {
    let n = inputs.len();
    let offsets: Vec<Vector2<f64>> = (0..n)
        .map(|i| {
            let unit = AffineTransform2D::new(thetas[i], xy(&anchor[i]), 1.0)?;
            Ok(unit.unmap_point(xy(&truth[i])))
        })
        .collect::<Result<_>>()?;
    let crop = estimate_crop_ratio(&offsets, image_width)?;
    let b = crop.b;

    let mut rows = Vec::with_capacity(n);
    let mut labels = DMatrix::zeros(n, 3);
    let mut label_ts = Vec::with_capacity(n);
    for i in 0..n {
        let label_t = AffineTransform2D::new(thetas[i], xy(&anchor[i]), b)?;
        let feature_t = if rotate_features {
            label_t
        } else {
            AffineTransform2D::new(0.0, xy(&anchor[i]), b)?
        };
        let patches = extract_patches(
            &inputs[i].pyramid,
            &feature_t,
            geometry,
            anchor[i].z,
            config.depth_clamp,
        )?;
        rows.push(flatten(&patches));
        let r = label_t.unmap_point(xy(&truth[i])) - label_t.unmap_point(xy(&anchor[i]));
        labels[(i, 0)] = r.x;
        labels[(i, 1)] = r.y;
        labels[(i, 2)] = truth[i].z - anchor[i].z;
        label_ts.push(label_t);
    }
    let predictor = fit_ridge(
        &design(&rows, geometry.feature_len()),
        &labels,
        geometry,
        &config.ridge,
    )?;
    for i in 0..n {
        let o = predictor.predict_features(&rows[i]);
        let t = &label_ts[i];
        let p = t.map_point(t.unmap_point(xy(&anchor[i])) + Vector2::new(o[0], o[1]));
        current[i] = Vector3::new(p.x, p.y, anchor[i].z + o[2]);
    }
    Ok((
        StageUnit {
            predictor,
            crop_ratio: b,
        },
        crop.clamped,
    ))
}

/// Builds a fresh refiner for the sample with the given index.
pub type RefinerFactory<'a> = &'a dyn Fn(usize) -> Result<Box<dyn LayerRefiner + 'a>>;

/// Trains the holistic baseline and every regressor of the hierarchical
/// cascade on `samples`, which must carry all 21 ground-truth joints.
///
/// Each stage is trained on the estimates of the stage before it: in-sample
/// estimates, or held-out ones when `parent_folds >= 2`. Finger layers read
/// parents from the previous layer's estimates when
/// `parents_from_predictions` is set, otherwise from the ground truth.
pub fn train_pipeline<S: Labeled>(samples: &[S], config: &CascadeConfig) -> Result<TrainedCascade> {
    train_pipeline_with(samples, config, None)
}

/// [`train_pipeline`] with a refiner applied to every layer's estimate
/// before it becomes the next layer's parents, so that finger layers learn
/// from the parents they will see at inference.
pub fn train_pipeline_with<S: Labeled>(
    samples: &[S],
    config: &CascadeConfig,
    refiner: Option<RefinerFactory<'_>>,
) -> Result<TrainedCascade> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptyInput("training needs samples"));
    }
    let truth: Vec<Vec<Vector3<f64>>> = samples
        .iter()
        .map(|s| {
            let joints = s.joints();
            if joints.len() != JOINT_COUNT || joints.validity().iter().any(|v| !v) {
                return Err(Error::JointSetMismatch(
                    "training needs all 21 joints".into(),
                ));
            }
            Ok(joints.points().to_vec())
        })
        .collect::<Result<_>>()?;
    let folds = config.parent_folds;
    let trajectories = if folds >= 2 && config.parents_from_predictions {
        if samples.len() < folds {
            return Err(Error::InvalidParameter(alloc::format!(
                "{} samples cannot fill {folds} folds",
                samples.len()
            )));
        }
        Some(held_out_trajectories(samples, &truth, config, refiner)?)
    } else {
        None
    };
    let frames: Vec<&DepthFrame> = samples.iter().map(|s| s.frame()).collect();
    fit_all(&frames, &truth, config, refiner, trajectories.as_deref())
}

/// Estimates of every stage of one sample, produced by a model that never
/// saw it.
struct Trajectory {
    /// Palm after each layer-0 stage.
    layer0: Vec<Vec<Vector3<f64>>>,
    theta: f64,
    /// `fingers[l - 1][k]`: layer `l` after stage `k`.
    fingers: [Vec<Vec<Vector3<f64>>>; 3],
    /// Each layer as handed to the next one, after refinement.
    parents: [Vec<Vector3<f64>>; 4],
}

fn held_out_trajectories<S: Labeled>(
    samples: &[S],
    truth: &[Vec<Vector3<f64>>],
    config: &CascadeConfig,
    refiner: Option<RefinerFactory<'_>>,
) -> Result<Vec<Trajectory>> {
    let n = samples.len();
    let folds = config.parent_folds;
    let inner = CascadeConfig {
        parent_folds: 0,
        ..config.clone()
    };
    let mut out: Vec<Option<Trajectory>> = (0..n).map(|_| None).collect();
    for k in 0..folds {
        let (lo, hi) = (k * n / folds, (k + 1) * n / folds);
        let index: Vec<usize> = (0..lo).chain(hi..n).collect();
        let subset: Vec<&DepthFrame> = index.iter().map(|&i| samples[i].frame()).collect();
        let subset_truth: Vec<Vec<Vector3<f64>>> =
            index.iter().map(|&i| truth[i].clone()).collect();
        let remap = |j: usize| match refiner {
            Some(f) => f(index[j]),
            None => Err(Error::InvalidParameter("no refiner".into())),
        };
        let model = fit_all(
            &subset,
            &subset_truth,
            &inner,
            refiner.map(|_| &remap as RefinerFactory<'_>),
            None,
        )?
        .model;
        for i in lo..hi {
            let mut r = refiner.map(|f| f(i)).transpose()?;
            let hook = r.as_mut().map(|b| &mut **b as &mut dyn LayerRefiner);
            let state = infer_hierarchical(&model, samples[i].frame(), hook)?;
            let mut layer0 = Vec::new();
            let mut fingers: [Vec<Vec<Vector3<f64>>>; 3] = Default::default();
            for rec in state.stage_log() {
                if rec.layer == 0 {
                    layer0.push(rec.joints.clone());
                } else {
                    fingers[rec.layer - 1].push(rec.joints.clone());
                }
            }
            let est = state.estimates();
            let parents = core::array::from_fn(|l| est.layer(l).expect("all layers").to_vec());
            out[i] = Some(Trajectory {
                layer0,
                theta: state.theta(),
                fingers,
                parents,
            });
        }
    }
    Ok(out
        .into_iter()
        .map(|t| t.expect("every sample is in one fold"))
        .collect())
}

fn fit_all(
    samples: &[&DepthFrame],
    truth: &[Vec<Vector3<f64>>],
    config: &CascadeConfig,
    refiner: Option<RefinerFactory<'_>>,
    held_out: Option<&[Trajectory]>,
) -> Result<TrainedCascade> {
    let geometry = config.geometry();
    let d = geometry.feature_len();
    let n = samples.len();
    let image_width = samples[0].width();
    let inputs: Vec<FrameInput> = samples
        .iter()
        .map(|s| FrameInput::new(s, config))
        .collect::<Result<_>>()?;

    let mut report = TrainingReport::default();

    // Whole-frame regressors.
    let global_rows: Vec<Vec<f64>> = inputs
        .iter()
        .map(|inp| {
            global_patches(&inp.pyramid, geometry, inp.z_ref, config.depth_clamp)
                .map(|p| flatten(&p))
        })
        .collect::<Result<_>>()?;
    let x_global = design(&global_rows, d);
    let relative = |k: usize| {
        DMatrix::from_fn(n, 3 * k, |i, c| {
            let p = truth[i][c / 3];
            if c % 3 == 2 {
                p.z - inputs[i].z_ref
            } else {
                p[c % 3]
            }
        })
    };
    let holistic = fit_ridge(&x_global, &relative(JOINT_COUNT), geometry, &config.ridge)?;
    let holistic_pred: Vec<Vec<Vector3<f64>>> = (0..n)
        .map(|i| {
            let o = holistic.predict_features(&global_rows[i]);
            (0..JOINT_COUNT)
                .map(|k| Vector3::new(o[3 * k], o[3 * k + 1], o[3 * k + 2] + inputs[i].z_ref))
                .collect()
        })
        .collect();
    report.holistic_error = mean_error(&holistic_pred, truth);

    let layer0_initial = fit_ridge(
        &x_global,
        &relative(PALM_JOINT_COUNT),
        geometry,
        &config.ridge,
    )?;
    let mut palm: Vec<Vec<Vector3<f64>>> = (0..n)
        .map(|i| {
            let o = layer0_initial.predict_features(&global_rows[i]);
            (0..PALM_JOINT_COUNT)
                .map(|k| Vector3::new(o[3 * k], o[3 * k + 1], o[3 * k + 2] + inputs[i].z_ref))
                .collect()
        })
        .collect();
    drop(global_rows);
    drop(x_global);
    let palm_truth: Vec<Vec<Vector3<f64>>> = truth
        .iter()
        .map(|t| t[..PALM_JOINT_COUNT].to_vec())
        .collect();
    report.stages.push(StageError {
        layer: 0,
        stage: 0,
        mean_error: mean_error(&palm, &palm_truth),
    });
    let mut thetas: Vec<f64> = palm.iter().map(|p| theta_of(p, 0.0)).collect();
    let mut held_thetas: Vec<f64> = match held_out {
        Some(h) => h.iter().map(|t| theta_of(&t.layer0[0], 0.0)).collect(),
        None => Vec::new(),
    };

    // Layer-0 refinement, one unit per joint; theta follows the estimates.
    let mut layer0_stages = Vec::new();
    for k in 0..config.stages_per_layer[0] {
        let (anchors, unit_thetas): (Vec<Vec<Vector3<f64>>>, &[f64]) = match held_out {
            Some(h) => (
                h.iter().map(|t| t.layer0[k].clone()).collect(),
                &held_thetas,
            ),
            None => (palm.clone(), &thetas),
        };
        let mut units = Vec::with_capacity(PALM_JOINT_COUNT);
        let mut next = palm.clone();
        for j in 0..PALM_JOINT_COUNT {
            let anchor: Vec<_> = anchors.iter().map(|p| p[j]).collect();
            let target: Vec<_> = truth.iter().map(|t| t[j]).collect();
            let mut current = anchor.clone();
            let (unit, clamped) = train_unit(
                &inputs,
                unit_thetas,
                &mut current,
                &target,
                &anchor,
                true,
                geometry,
                config,
                image_width,
            )?;
            if clamped {
                report.clamped_crops.push((0, k + 1, j));
            }
            if held_out.is_none() {
                for (row, c) in next.iter_mut().zip(current) {
                    row[j] = c;
                }
            }
            units.push(unit);
        }
        if held_out.is_none() {
            palm = next;
            report.stages.push(StageError {
                layer: 0,
                stage: k + 1,
                mean_error: mean_error(&palm, &palm_truth),
            });
        }
        for (t, p) in thetas.iter_mut().zip(&palm) {
            *t = theta_of(p, *t);
        }
        if let Some(h) = held_out {
            for (t, tr) in held_thetas.iter_mut().zip(h) {
                *t = theta_of(&tr.layer0[k + 1], *t);
            }
        }
        layer0_stages.push(units);
    }
    if let Some(h) = held_out {
        let last: Vec<_> = h
            .iter()
            .map(|t| t.layer0[t.layer0.len() - 1].clone())
            .collect();
        report.stages.push(StageError {
            layer: 0,
            stage: config.stages_per_layer[0],
            mean_error: mean_error(&last, &palm_truth),
        });
    }

    // In-sample refiners keep per-sample state across layers.
    let mut refiners: Vec<Box<dyn LayerRefiner + '_>> = Vec::new();
    let refine_in_sample = held_out.is_none() && config.parents_from_predictions;
    if let (Some(f), true) = (refiner, refine_in_sample) {
        refiners = (0..n).map(f).collect::<Result<_>>()?;
        for (i, r) in refiners.iter_mut().enumerate() {
            palm[i] = r.refine_layer(0, &palm[i], samples[i])?;
        }
    }

    let finger_thetas: Vec<f64> = match (held_out, config.parents_from_predictions) {
        (Some(h), true) => h.iter().map(|t| t.theta).collect(),
        (None, true) => thetas,
        (_, false) => palm_truth.iter().map(|p| theta_of(p, 0.0)).collect(),
    };
    let mut parents: Vec<Vec<Vector3<f64>>> = match (held_out, config.parents_from_predictions) {
        (Some(h), true) => h.iter().map(|t| t.parents[0][1..].to_vec()).collect(),
        (None, true) => palm.iter().map(|p| p[1..].to_vec()).collect(),
        (_, false) => truth
            .iter()
            .map(|t| t[1..PALM_JOINT_COUNT].to_vec())
            .collect(),
    };

    let mut finger_layers = Vec::with_capacity(3);
    for layer in 1..=3 {
        let start = PALM_JOINT_COUNT + FINGER_COUNT * (layer - 1);
        let layer_truth: Vec<Vec<Vector3<f64>>> = truth
            .iter()
            .map(|t| t[start..start + FINGER_COUNT].to_vec())
            .collect();
        let mut est = parents.clone();
        let mut initial = Vec::with_capacity(FINGER_COUNT);
        for f in 0..FINGER_COUNT {
            let anchor: Vec<_> = parents.iter().map(|p| p[f]).collect();
            let target: Vec<_> = layer_truth.iter().map(|t| t[f]).collect();
            let mut current = anchor.clone();
            let (unit, clamped) = train_unit(
                &inputs,
                &finger_thetas,
                &mut current,
                &target,
                &anchor,
                true,
                geometry,
                config,
                image_width,
            )?;
            if clamped {
                report.clamped_crops.push((layer, 0, f + 1));
            }
            for (row, c) in est.iter_mut().zip(current) {
                row[f] = c;
            }
            initial.push(unit);
        }
        report.stages.push(StageError {
            layer,
            stage: 0,
            mean_error: mean_error(&est, &layer_truth),
        });

        let mut stages = Vec::new();
        for k in 0..config.stages_per_layer[layer] {
            let anchors: Vec<Vec<Vector3<f64>>> = match held_out {
                Some(h) => h.iter().map(|t| t.fingers[layer - 1][k].clone()).collect(),
                None => est.clone(),
            };
            let mut units = Vec::with_capacity(FINGER_COUNT);
            let mut next = est.clone();
            for f in 0..FINGER_COUNT {
                let anchor: Vec<_> = anchors.iter().map(|p| p[f]).collect();
                let target: Vec<_> = layer_truth.iter().map(|t| t[f]).collect();
                let mut current = anchor.clone();
                let (unit, clamped) = train_unit(
                    &inputs,
                    &finger_thetas,
                    &mut current,
                    &target,
                    &anchor,
                    false,
                    geometry,
                    config,
                    image_width,
                )?;
                if clamped {
                    report.clamped_crops.push((layer, k + 1, f + 1));
                }
                for (row, c) in next.iter_mut().zip(current) {
                    row[f] = c;
                }
                units.push(unit);
            }
            est = next;
            report.stages.push(StageError {
                layer,
                stage: k + 1,
                mean_error: mean_error(&est, &layer_truth),
            });
            stages.push(units);
        }
        finger_layers.push(FingerLayerModel { initial, stages });
        if layer < 3 {
            if !refiners.is_empty() {
                for (i, r) in refiners.iter_mut().enumerate() {
                    est[i] = r.refine_layer(layer, &est[i], samples[i])?;
                }
            }
            parents = match (held_out, config.parents_from_predictions) {
                (Some(h), true) => h.iter().map(|t| t.parents[layer].clone()).collect(),
                (None, true) => est,
                (_, false) => layer_truth,
            };
        }
    }

    Ok(TrainedCascade {
        model: CascadeModel {
            config: config.clone(),
            holistic,
            layer0_initial,
            layer0_stages,
            finger_layers,
        },
        report,
    })
}
