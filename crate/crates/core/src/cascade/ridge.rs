use alloc::{vec, vec::Vec};

use nalgebra::{DMatrix, DVector};
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::predictor::{PatchGeometry, Predictor};
use crate::{Error, Result};

/// Ridge regression settings.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct RidgeConfig {
    /// Candidate penalties, relative to the mean diagonal of the centered
    /// Gram matrix.
    pub lambdas: Vec<f64>,
    /// Trailing fraction of the samples held out to pick the penalty.
    pub validation_fraction: f64,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        Self {
            lambdas: vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1e4],
            validation_fraction: 0.2,
        }
    }
}

/// Linear map `y = W^T x + c` fitted by ridge regression with an
/// unpenalized intercept.
#[derive(Clone, Debug, PartialEq)]
pub struct RidgePredictor {
    geometry: PatchGeometry,
    /// `feature_len x outputs`.
    weights: DMatrix<f64>,
    intercept: DVector<f64>,
    /// Chosen penalty, relative scale.
    lambda: f64,
}

impl RidgePredictor {
    pub fn from_parts(
        geometry: PatchGeometry,
        weights: DMatrix<f64>,
        intercept: DVector<f64>,
        lambda: f64,
    ) -> Result<Self> {
        if weights.nrows() != geometry.feature_len() || weights.ncols() != intercept.len() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "weights {}x{} do not fit {} features and {} outputs",
                weights.nrows(),
                weights.ncols(),
                geometry.feature_len(),
                intercept.len()
            )));
        }
        Ok(Self {
            geometry,
            weights,
            intercept,
            lambda,
        })
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn intercept(&self) -> &DVector<f64> {
        &self.intercept
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl Predictor for RidgePredictor {
    fn geometry(&self) -> PatchGeometry {
        self.geometry
    }

    fn output_len(&self) -> usize {
        self.intercept.len()
    }

    fn predict_features(&self, features: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(features);
        (self.weights.tr_mul(&x) + &self.intercept)
            .as_slice()
            .to_vec()
    }
}

struct Centered {
    x: DMatrix<f64>,
    y: DMatrix<f64>,
    x_mean: DVector<f64>,
    y_mean: DVector<f64>,
    gram: DMatrix<f64>,
    scale: f64,
}

fn center(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Centered {
    let n = x.nrows() as f64;
    let x_mean = DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n));
    let y_mean = DVector::from_iterator(y.ncols(), y.column_iter().map(|c| c.sum() / n));
    let mut xc = x.clone();
    for (mut col, m) in xc.column_iter_mut().zip(x_mean.iter()) {
        col.add_scalar_mut(-m);
    }
    let mut yc = y.clone();
    for (mut col, m) in yc.column_iter_mut().zip(y_mean.iter()) {
        col.add_scalar_mut(-m);
    }
    let gram = xc.tr_mul(&xc);
    let scale = gram.trace() / gram.nrows().max(1) as f64;
    Centered {
        x: xc,
        y: yc,
        x_mean,
        y_mean,
        gram,
        scale,
    }
}

/// Weights and intercept for one relative penalty.
fn solve(c: &Centered, lambda: f64) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let d = c.gram.nrows();
    let k = c.y.ncols();
    let weights = if c.scale > 0.0 {
        let mut a = c.gram.clone();
        for i in 0..d {
            a[(i, i)] += lambda * c.scale;
        }
        let chol = a
            .cholesky()
            .ok_or_else(|| Error::Numerical("ridge system not positive definite".into()))?;
        chol.solve(&c.x.tr_mul(&c.y))
    } else {
        DMatrix::zeros(d, k)
    };
    let intercept = &c.y_mean - weights.tr_mul(&c.x_mean);
    Ok((weights, intercept))
}

/// Fits a ridge predictor on `x` (`n x feature_len`) and `y` (`n x outputs`).
///
/// The penalty is chosen from `config.lambdas` on a fixed trailing
/// validation split, then the model is refitted on all samples. With fewer
/// than two validation samples the middle candidate is used.
pub fn fit_ridge(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    geometry: PatchGeometry,
    config: &RidgeConfig,
) -> Result<RidgePredictor> {
    if x.nrows() == 0 {
        return Err(Error::EmptyInput("ridge regression needs samples"));
    }
    if x.nrows() != y.nrows() || x.ncols() != geometry.feature_len() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "design {}x{}, targets {}x{}, geometry {} features",
            x.nrows(),
            x.ncols(),
            y.nrows(),
            y.ncols(),
            geometry.feature_len()
        )));
    }
    if config.lambdas.is_empty() || config.lambdas.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::InvalidParameter(
            "ridge penalties must be positive".into(),
        ));
    }

    let n = x.nrows();
    let n_val = (n as f64 * config.validation_fraction) as usize;
    let lambda = if n_val >= 2 && n - n_val >= 2 {
        let n_fit = n - n_val;
        let fit = center(
            &x.rows(0, n_fit).into_owned(),
            &y.rows(0, n_fit).into_owned(),
        );
        let x_val = x.rows(n_fit, n_val);
        let y_val = y.rows(n_fit, n_val);
        let mut best = (f64::INFINITY, config.lambdas[0]);
        for &lambda in &config.lambdas {
            let (w, c) = solve(&fit, lambda)?;
            let mut pred = x_val * &w;
            for (mut col, ci) in pred.column_iter_mut().zip(c.iter()) {
                col.add_scalar_mut(*ci);
            }
            let err = (pred - y_val).norm_squared();
            if err < best.0 {
                best = (err, lambda);
            }
        }
        best.1
    } else {
        config.lambdas[config.lambdas.len() / 2]
    };

    let all = center(x, y);
    let (weights, intercept) = solve(&all, lambda)?;
    RidgePredictor::from_parts(geometry, weights, intercept, lambda)
}
