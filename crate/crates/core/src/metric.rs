//! Proportion of joints within a maximum 3D error.

use alloc::{vec, vec::Vec};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::hand::JointLocations;
use crate::{Error, Result};

/// How joint errors are pooled into the curve.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Aggregation {
    /// Every joint instance counts on its own.
    #[default]
    Pooled,
    /// One value per frame: the worst joint.
    FrameMax,
}

/// Mean and median error of one joint over all frames.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointError {
    pub layer: usize,
    pub joint: usize,
    pub mean: f64,
    pub median: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricCurve {
    /// Ascending.
    pub thresholds: Vec<f64>,
    /// Fraction of entries with error at most the matching threshold.
    pub proportions: Vec<f64>,
    pub per_joint: Vec<JointError>,
}

/// `count` evenly spaced thresholds from 0 to half the hand span.
pub fn default_thresholds(hand_span: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..count)
            .map(|i| 0.5 * hand_span * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// Euclidean error of every joint of one frame. A joint flagged invalid in
/// the prediction, or non-finite, has infinite error.
pub fn joint_errors(prediction: &JointLocations, truth: &JointLocations) -> Result<Vec<f64>> {
    if prediction.layers() != truth.layers() {
        return Err(Error::JointSetMismatch(alloc::format!(
            "prediction covers {:?}, ground truth {:?}",
            prediction.layers(),
            truth.layers()
        )));
    }
    Ok(prediction
        .points()
        .iter()
        .zip(truth.points())
        .zip(prediction.validity())
        .map(|((p, t), valid)| {
            let e = (p - t).norm();
            if *valid && e.is_finite() {
                e
            } else {
                f64::INFINITY
            }
        })
        .collect())
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn compute_metric(
    predictions: &[JointLocations],
    truth: &[JointLocations],
    thresholds: &[f64],
    aggregation: Aggregation,
) -> Result<MetricCurve> {
    if predictions.len() != truth.len() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "{} predictions for {} ground-truth frames",
            predictions.len(),
            truth.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::EmptyInput("metric needs at least one frame"));
    }
    if thresholds.windows(2).any(|w| !(w[0] <= w[1])) || thresholds.iter().any(|t| t.is_nan()) {
        return Err(Error::InvalidParameter(
            "thresholds must be ascending".into(),
        ));
    }
    let frames: Vec<Vec<f64>> = predictions
        .iter()
        .zip(truth)
        .map(|(p, t)| joint_errors(p, t))
        .collect::<Result<_>>()?;
    let joints = frames[0].len();
    if frames.iter().any(|f| f.len() != joints)
        || truth.iter().any(|t| t.layers() != truth[0].layers())
    {
        return Err(Error::JointSetMismatch(
            "frames cover different joint sets".into(),
        ));
    }

    let values: Vec<f64> = match aggregation {
        Aggregation::Pooled => frames.iter().flatten().copied().collect(),
        Aggregation::FrameMax => frames
            .iter()
            .map(|f| f.iter().copied().fold(0.0, f64::max))
            .collect(),
    };
    let total = values.len() as f64;
    let proportions = thresholds
        .iter()
        .map(|&d| values.iter().filter(|&&e| e <= d).count() as f64 / total)
        .collect();

    let per_joint = truth[0]
        .iter()
        .enumerate()
        .map(|(k, (layer, joint, _))| {
            let mut col: Vec<f64> = frames.iter().map(|f| f[k]).collect();
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            JointError {
                layer,
                joint,
                mean,
                median: median(&mut col),
            }
        })
        .collect();

    Ok(MetricCurve {
        thresholds: thresholds.to_vec(),
        proportions,
        per_joint,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hand::{LayerSet, JOINT_COUNT};
    use nalgebra::Vector3;
    use proptest::prelude::*;

    fn frame(seed: f64) -> JointLocations {
        JointLocations::full(
            (0..JOINT_COUNT)
                .map(|k| Vector3::new(seed + k as f64 * 0.01, 0.5, 1.0))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn perfect_predictions_score_one() {
        let t = vec![frame(0.1), frame(0.2)];
        let c = compute_metric(&t, &t, &default_thresholds(0.38, 40), Aggregation::Pooled).unwrap();
        assert!(c.proportions.iter().all(|p| *p == 1.0));
        assert!(c.per_joint.iter().all(|j| j.mean == 0.0 && j.median == 0.0));
    }

    #[test]
    fn one_far_joint_plateaus_at_twenty_of_twenty_one() {
        let t = frame(0.1);
        let mut p = t.clone();
        p.set(2, 3, Vector3::new(5.0, 5.0, 5.0)).unwrap();
        let c = compute_metric(
            &[p.clone()],
            &[t.clone()],
            &default_thresholds(0.38, 40),
            Aggregation::Pooled,
        )
        .unwrap();
        assert!(c
            .proportions
            .iter()
            .all(|v| (*v - 20.0 / 21.0).abs() < 1e-15));
        let c = compute_metric(&[p], &[t], &[0.0, 0.19], Aggregation::FrameMax).unwrap();
        assert_eq!(c.proportions, vec![0.0, 0.0]);
    }

    #[test]
    fn invalid_joint_never_counts() {
        let t = frame(0.1);
        let mut p = t.clone();
        p.set_valid(1, 1, false).unwrap();
        let c = compute_metric(&[p], &[t], &[1e9], Aggregation::Pooled).unwrap();
        assert!((c.proportions[0] - 20.0 / 21.0).abs() < 1e-15);
        assert!(c.per_joint[6].mean.is_infinite());
    }

    #[test]
    fn mismatched_sets_are_rejected() {
        let t = frame(0.1);
        let palm = t.restrict(LayerSet::single(0)).unwrap();
        assert!(compute_metric(&[palm], &[t.clone()], &[0.1], Aggregation::Pooled).is_err());
        assert!(compute_metric(&[], &[t.clone()], &[0.1], Aggregation::Pooled).is_err());
        assert!(compute_metric(&[t.clone()], &[t], &[0.2, 0.1], Aggregation::Pooled).is_err());
    }

    #[test]
    fn threshold_grid() {
        let g = default_thresholds(0.38, 40);
        assert_eq!(g.len(), 40);
        assert_eq!(g[0], 0.0);
        assert!((g[39] - 0.19).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn curve_is_monotone_and_bounded(
            noise in proptest::collection::vec(-0.2f64..0.2, 3 * JOINT_COUNT * 3),
            max in prop_oneof![Just(Aggregation::Pooled), Just(Aggregation::FrameMax)],
        ) {
            let truth: Vec<_> = (0..3).map(|f| frame(f as f64 * 0.1)).collect();
            let preds: Vec<_> = truth
                .iter()
                .enumerate()
                .map(|(f, t)| {
                    let mut p = t.clone();
                    for (k, q) in p.points_mut().iter_mut().enumerate() {
                        let b = 3 * (f * JOINT_COUNT + k);
                        *q += Vector3::new(noise[b], noise[b + 1], noise[b + 2]);
                    }
                    p
                })
                .collect();
            let c = compute_metric(&preds, &truth, &default_thresholds(0.38, 40), max).unwrap();
            prop_assert!(c.proportions.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(c.proportions.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }
}
