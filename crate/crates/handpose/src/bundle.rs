//! Model bundles: a directory holding `manifest.toml` and one weight blob
//! per regressor.
//!
//! A blob is a grid in the core binary tensor format with one column per
//! output and one row per feature, followed by a final row holding the
//! intercept. The manifest records the cascade settings, and the patch
//! geometry, penalty and crop ratio of every regressor.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use handpose_core::cascade::{
    CascadeConfig, CascadeModel, FingerLayerModel, PatchGeometry, Predictor, RidgePredictor,
    StageUnit,
};
use handpose_core::hand::FINGER_COUNT;
use handpose_core::spatial::{decode_grid, encode_grid, RasterGrid};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::write_file;
use crate::error::{Error, Result};

pub const BUNDLE_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.toml";
const BUNDLE_KIND: &str = "handpose-cascade";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Holistic,
    /// Joint regressor of all six palm joints.
    PalmInitial,
    /// Layer-0 refinement of one palm joint.
    PalmStage,
    /// Offset regressor of one finger joint from its parent.
    Finger,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitEntry {
    pub role: Role,
    pub layer: usize,
    /// 0 is the initial regressor.
    pub stage: usize,
    /// Palm joint `0..6` or finger `1..=5`; 0 for whole-layer regressors.
    pub joint: usize,
    pub crop_ratio: f64,
    pub lambda: f64,
    pub outputs: usize,
    pub geometry: PatchGeometry,
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub kind: String,
    pub cascade: CascadeConfig,
    pub units: Vec<UnitEntry>,
}

type Key = (Role, usize, usize, usize);

fn entry(key: Key, crop_ratio: f64, p: &RidgePredictor) -> UnitEntry {
    let (role, layer, stage, joint) = key;
    let file = match role {
        Role::Holistic => "holistic.hptn".to_string(),
        Role::PalmInitial => "palm_initial.hptn".to_string(),
        _ => format!("layer{layer}_stage{stage}_joint{joint}.hptn"),
    };
    UnitEntry {
        role,
        layer,
        stage,
        joint,
        crop_ratio,
        lambda: p.lambda(),
        outputs: p.output_len(),
        geometry: p.geometry(),
        file,
    }
}

fn units(model: &CascadeModel<RidgePredictor>) -> Vec<(UnitEntry, &RidgePredictor)> {
    let mut out = vec![
        (
            entry((Role::Holistic, 0, 0, 0), 1.0, &model.holistic),
            &model.holistic,
        ),
        (
            entry((Role::PalmInitial, 0, 0, 0), 1.0, &model.layer0_initial),
            &model.layer0_initial,
        ),
    ];
    for (k, stage) in model.layer0_stages.iter().enumerate() {
        for (j, u) in stage.iter().enumerate() {
            let key = (Role::PalmStage, 0, k + 1, j);
            out.push((entry(key, u.crop_ratio, &u.predictor), &u.predictor));
        }
    }
    for (l, layer) in model.finger_layers.iter().enumerate() {
        let all = std::iter::once(&layer.initial).chain(&layer.stages);
        for (k, stage) in all.enumerate() {
            for (f, u) in stage.iter().enumerate() {
                let key = (Role::Finger, l + 1, k, f + 1);
                out.push((entry(key, u.crop_ratio, &u.predictor), &u.predictor));
            }
        }
    }
    out
}

fn encode_predictor(p: &RidgePredictor) -> Vec<u8> {
    let (w, c) = (p.weights(), p.intercept());
    let rows = w.nrows() + 1;
    let cols = w.ncols();
    let grid = RasterGrid::from_fn(cols, rows, 0.0, |x, y| {
        if y < w.nrows() {
            w[(y, x)]
        } else {
            c[x]
        }
    })
    .expect("non-empty predictor");
    encode_grid(&grid)
}

/// Writes the bundle into `dir`, creating it if needed.
pub fn save_model(dir: &Path, model: &CascadeModel<RidgePredictor>) -> Result<()> {
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let units = units(model);
    for (e, p) in &units {
        write_file(&dir.join(&e.file), &encode_predictor(p))?;
    }
    let manifest = Manifest {
        schema_version: BUNDLE_SCHEMA_VERSION,
        kind: BUNDLE_KIND.into(),
        cascade: model.config.clone(),
        units: units.into_iter().map(|(e, _)| e).collect(),
    };
    let text = toml::to_string(&manifest).expect("manifest serializes");
    write_file(&dir.join(MANIFEST), text.as_bytes())
}

fn load_unit(dir: &Path, e: &UnitEntry) -> Result<RidgePredictor> {
    let path = dir.join(&e.file);
    let bytes = fs::read(&path).map_err(Error::io(&path))?;
    let grid = decode_grid(&bytes).map_err(|err| Error::format(&path, err.to_string()))?;
    let d = e.geometry.feature_len();
    if grid.width() != e.outputs || grid.height() != d + 1 {
        return Err(Error::format(
            &path,
            format!(
                "blob is {}x{}, manifest expects {} outputs and {d} features",
                grid.width(),
                grid.height(),
                e.outputs
            ),
        ));
    }
    let v = grid.values();
    let weights = DMatrix::from_row_slice(d, e.outputs, &v[..d * e.outputs]);
    let intercept = DVector::from_column_slice(&v[d * e.outputs..]);
    RidgePredictor::from_parts(e.geometry, weights, intercept, e.lambda)
        .map_err(|err| Error::format(&path, err.to_string()))
}

pub fn load_model(dir: &Path) -> Result<CascadeModel<RidgePredictor>> {
    let mpath = dir.join(MANIFEST);
    let text = fs::read_to_string(&mpath).map_err(Error::io(&mpath))?;
    let manifest: Manifest =
        toml::from_str(&text).map_err(|e| Error::format(&mpath, e.to_string()))?;
    if manifest.kind != BUNDLE_KIND || manifest.schema_version != BUNDLE_SCHEMA_VERSION {
        return Err(Error::format(
            &mpath,
            format!(
                "not a version {BUNDLE_SCHEMA_VERSION} {BUNDLE_KIND} bundle (found {} version {})",
                manifest.kind, manifest.schema_version
            ),
        ));
    }
    let mut table: BTreeMap<Key, StageUnit<RidgePredictor>> = BTreeMap::new();
    for e in &manifest.units {
        let key = (e.role, e.layer, e.stage, e.joint);
        let unit = StageUnit {
            predictor: load_unit(dir, e)?,
            crop_ratio: e.crop_ratio,
        };
        if table.insert(key, unit).is_some() {
            return Err(Error::format(&mpath, format!("duplicate unit {key:?}")));
        }
    }
    let mut take = |key: Key| {
        table
            .remove(&key)
            .ok_or_else(|| Error::format(&mpath, format!("missing unit {key:?}")))
    };
    let stages = manifest.cascade.stages_per_layer;
    let holistic = take((Role::Holistic, 0, 0, 0))?.predictor;
    let layer0_initial = take((Role::PalmInitial, 0, 0, 0))?.predictor;
    let layer0_stages = (1..=stages[0])
        .map(|k| (0..6).map(|j| take((Role::PalmStage, 0, k, j))).collect())
        .collect::<Result<_>>()?;
    let finger_layers = (1..=3)
        .map(|l| {
            let mut all = (0..=stages[l])
                .map(|k| {
                    (1..=FINGER_COUNT)
                        .map(|f| take((Role::Finger, l, k, f)))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            let initial = all.remove(0);
            Ok(FingerLayerModel {
                initial,
                stages: all,
            })
        })
        .collect::<Result<_>>()?;
    if let Some(key) = table.keys().next() {
        return Err(Error::format(&mpath, format!("unexpected unit {key:?}")));
    }
    Ok(CascadeModel {
        config: manifest.cascade,
        holistic,
        layer0_initial,
        layer0_stages,
        finger_layers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use handpose_core::cascade::train_pipeline;
    use handpose_core::hand::HandSkeleton;
    use handpose_core::synth::{generate_dataset, Camera, PoseSampler};

    fn tiny_model() -> CascadeModel<RidgePredictor> {
        let skel = HandSkeleton::default();
        let samples =
            generate_dataset(&PoseSampler::new(&skel, 5), &skel, &Camera::default(), 12).unwrap();
        let cfg = CascadeConfig {
            patch_size: 4,
            pyramid_factors: vec![2],
            stages_per_layer: [1, 1, 0, 0],
            ..CascadeConfig::default()
        };
        train_pipeline(&samples, &cfg).unwrap().model
    }

    #[test]
    fn roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let model = tiny_model();
        save_model(dir.path(), &model).unwrap();
        assert_eq!(load_model(dir.path()).unwrap(), model);
    }

    #[test]
    fn missing_blob_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        save_model(dir.path(), &tiny_model()).unwrap();
        fs::remove_file(dir.path().join("layer2_stage0_joint3.hptn")).unwrap();
        assert!(matches!(load_model(dir.path()), Err(Error::Io { .. })));
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        save_model(dir.path(), &tiny_model()).unwrap();
        let m = dir.path().join(MANIFEST);
        let text = fs::read_to_string(&m)
            .unwrap()
            .replace(BUNDLE_KIND, "other");
        fs::write(&m, text).unwrap();
        assert!(matches!(load_model(dir.path()), Err(Error::Format { .. })));
    }
}
