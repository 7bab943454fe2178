//! The steps behind the command-line subcommands. Per-frame work runs on the
//! rayon pool and is collected in frame order, so results do not depend on
//! the thread count.

use std::fs;
use std::path::{Path, PathBuf};

use handpose_core::cascade::{
    infer_hierarchical, infer_holistic, train_pipeline_with, CascadeModel, Labeled, LayerRefiner,
    RidgePredictor, TrainedCascade,
};
use handpose_core::hand::JointLocations;
use handpose_core::metric::{compute_metric, MetricCurve};
use handpose_core::pso::SwarmRefiner;
use handpose_core::synth::{generate_sample, DepthFrame};
use rayon::prelude::*;

use crate::bundle::{load_model, save_model, MANIFEST};
use crate::config::Config;
use crate::dataset::{frame_id, load_annotations, save_annotations, write_file, Annotated};
use crate::error::{Error, Result};
use crate::report::{write_training_report, EnergyTrace, StageTrace};

pub const CONFIG_FILE: &str = "config.toml";
pub const ANNOTATIONS_FILE: &str = "annotations.txt";
pub const TRAIN_SPLIT: &str = "train";
pub const TEST_SPLIT: &str = "test";
pub const DISCRIMINATIVE_MODEL: &str = "discriminative";
pub const HYBRID_MODEL: &str = "hybrid";

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    /// All 21 joints regressed at once from the whole frame.
    Holistic,
    /// Layer-by-layer cascade with spatial attention.
    Hierarchical,
    /// Hierarchical, with every layer refined by the kinematic swarm.
    Hybrid,
}

impl Labeled for Annotated {
    fn frame(&self) -> &DepthFrame {
        &self.frame
    }

    fn joints(&self) -> &JointLocations {
        &self.joints
    }
}

/// Frames `range` of the configured sampler.
pub fn generate_frames(config: &Config, range: std::ops::Range<usize>) -> Result<Vec<Annotated>> {
    let sampler = config.sampler();
    range
        .into_par_iter()
        .map(|i| {
            let s = generate_sample(&sampler, &config.skeleton, &config.camera, i as u64)?;
            Ok(Annotated {
                id: frame_id(i),
                frame: s.frame,
                joints: s.joints,
            })
        })
        .collect()
}

pub fn split_annotations(root: &Path, split: &str) -> PathBuf {
    root.join(split).join(ANNOTATIONS_FILE)
}

/// Writes the effective config and a train and a test split under `out`.
/// The splits use disjoint sample indices of one sampler.
pub fn generate_splits(config: &Config, out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(Error::io(out))?;
    write_file(&out.join(CONFIG_FILE), config.to_toml().as_bytes())?;
    let n_train = config.dataset.train_frames;
    let n_test = config.dataset.test_frames;
    let train = generate_frames(config, 0..n_train)?;
    save_annotations(&split_annotations(out, TRAIN_SPLIT), &train)?;
    let test = generate_frames(config, n_train..n_train + n_test)?;
    save_annotations(&split_annotations(out, TEST_SPLIT), &test)?;
    log::info!("generated {n_train} training and {n_test} test frames");
    Ok(())
}

/// Annotation file for `path`: the file itself, or `annotations.txt`
/// inside a directory.
pub fn resolve_annotations(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(ANNOTATIONS_FILE)
    } else {
        path.to_path_buf()
    }
}

pub fn load_frames(path: &Path) -> Result<Vec<Annotated>> {
    Ok(load_annotations(&resolve_annotations(path))?.items)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModels {
    pub discriminative: TrainedCascade,
    /// Trained with swarm-refined parents.
    pub hybrid: Option<TrainedCascade>,
}

fn swarm_refiner(config: &Config, frame: &DepthFrame, stream: u64) -> Result<SwarmRefiner> {
    Ok(SwarmRefiner::new(
        frame,
        &config.skeleton,
        config.likelihood.clone(),
        config.swarm.clone(),
        stream,
    )?)
}

pub fn train_models(config: &Config, frames: &[Annotated]) -> Result<TrainedModels> {
    log::info!(
        "training the discriminative cascade on {} frames",
        frames.len()
    );
    let discriminative = train_pipeline_with(frames, &config.cascade, None)?;
    let hybrid = if config.training.hybrid_aware {
        log::info!("training the hybrid-aware cascade");
        let factory = |i: usize| -> handpose_core::Result<Box<dyn LayerRefiner + '_>> {
            let r = SwarmRefiner::new(
                &frames[i].frame,
                &config.skeleton,
                config.likelihood.clone(),
                config.swarm.clone(),
                i as u64,
            )?;
            Ok(Box::new(r))
        };
        Some(train_pipeline_with(
            frames,
            &config.cascade,
            Some(&factory),
        )?)
    } else {
        None
    };
    Ok(TrainedModels {
        discriminative,
        hybrid,
    })
}

pub fn save_models(dir: &Path, models: &TrainedModels) -> Result<()> {
    let mut all = vec![(DISCRIMINATIVE_MODEL, &models.discriminative)];
    all.extend(models.hybrid.as_ref().map(|h| (HYBRID_MODEL, h)));
    for (name, trained) in all {
        let sub = dir.join(name);
        save_model(&sub, &trained.model)?;
        write_training_report(&sub.join("training.csv"), &trained.report)?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Models {
    pub discriminative: CascadeModel<RidgePredictor>,
    pub hybrid: Option<CascadeModel<RidgePredictor>>,
}

impl Models {
    /// The model serving `mode`.
    pub fn for_mode(&self, mode: Mode) -> &CascadeModel<RidgePredictor> {
        match (mode, &self.hybrid) {
            (Mode::Hybrid, Some(h)) => h,
            _ => &self.discriminative,
        }
    }
}

impl From<TrainedModels> for Models {
    fn from(t: TrainedModels) -> Self {
        Self {
            discriminative: t.discriminative.model,
            hybrid: t.hybrid.map(|h| h.model),
        }
    }
}

pub fn load_models(dir: &Path) -> Result<Models> {
    let discriminative = load_model(&dir.join(DISCRIMINATIVE_MODEL))?;
    let hybrid_dir = dir.join(HYBRID_MODEL);
    let hybrid = if hybrid_dir.join(MANIFEST).exists() {
        Some(load_model(&hybrid_dir)?)
    } else {
        None
    };
    Ok(Models {
        discriminative,
        hybrid,
    })
}

/// Estimates for every frame. The swarm of frame `i` draws from stream `i`.
pub fn infer(
    config: &Config,
    models: &Models,
    frames: &[Annotated],
    mode: Mode,
) -> Result<Vec<JointLocations>> {
    let model = models.for_mode(mode);
    frames
        .par_iter()
        .enumerate()
        .map(|(i, a)| {
            Ok(match mode {
                Mode::Holistic => infer_holistic(model, &a.frame)?,
                Mode::Hierarchical => infer_hierarchical(model, &a.frame, None)?.estimates(),
                Mode::Hybrid => {
                    let mut r = swarm_refiner(config, &a.frame, i as u64)?;
                    infer_hierarchical(model, &a.frame, Some(&mut r))?.estimates()
                }
            })
        })
        .collect()
}

pub fn evaluate(
    config: &Config,
    predictions: &[JointLocations],
    truth: &[JointLocations],
) -> Result<MetricCurve> {
    Ok(compute_metric(
        predictions,
        truth,
        &config.thresholds(),
        config.eval.aggregation,
    )?)
}

/// Per-stage errors against the annotations and, in hybrid mode, the
/// global-best energy of every swarm generation.
pub fn inspect(
    config: &Config,
    models: &Models,
    frames: &[Annotated],
    mode: Mode,
) -> Result<(Vec<StageTrace>, Vec<EnergyTrace>)> {
    if mode == Mode::Holistic {
        return Err(Error::Config(
            "inspect traces the cascade; use hierarchical or hybrid mode".into(),
        ));
    }
    let model = models.for_mode(mode);
    let per_frame: Vec<(Vec<(usize, usize, f64)>, Vec<EnergyTrace>)> = frames
        .par_iter()
        .enumerate()
        .map(|(i, a)| {
            let mut refiner = match mode {
                Mode::Hybrid => Some(swarm_refiner(config, &a.frame, i as u64)?),
                _ => None,
            };
            let hook = refiner.as_mut().map(|r| r as &mut dyn LayerRefiner);
            let state = infer_hierarchical(model, &a.frame, hook)?;
            let mut stages = Vec::new();
            for rec in state.stage_log() {
                let truth = a
                    .joints
                    .layer(rec.layer)
                    .expect("annotations hold all layers");
                let e = rec
                    .joints
                    .iter()
                    .zip(truth)
                    .map(|(p, t)| (p - t).norm())
                    .sum::<f64>()
                    / truth.len() as f64;
                stages.push((rec.layer, rec.stage, e));
            }
            let energies = refiner
                .map(|r| {
                    r.history
                        .iter()
                        .flat_map(|h| {
                            h.trace.iter().enumerate().map(|(g, &energy)| EnergyTrace {
                                frame: a.id.clone(),
                                layer: h.layer,
                                generation: g,
                                energy,
                            })
                        })
                        .collect()
                })
                .unwrap_or_default();
            Ok((stages, energies))
        })
        .collect::<Result<_>>()?;

    let mut sums: Vec<(usize, usize, f64, usize)> = Vec::new();
    let mut energies = Vec::new();
    for (stages, e) in per_frame {
        for (layer, stage, err) in stages {
            match sums.iter_mut().find(|s| s.0 == layer && s.1 == stage) {
                Some(s) => {
                    s.2 += err;
                    s.3 += 1;
                }
                None => sums.push((layer, stage, err, 1)),
            }
        }
        energies.extend(e);
    }
    let stages = sums
        .into_iter()
        .map(|(layer, stage, total, n)| StageTrace {
            layer,
            stage,
            mean_error: total / n as f64,
        })
        .collect();
    Ok((stages, energies))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> Config {
        let mut c = Config::default().with_seed(9);
        c.dataset.train_frames = 6;
        c.dataset.test_frames = 2;
        c.cascade.patch_size = 4;
        c.cascade.pyramid_factors = vec![2];
        c.swarm.particles = 8;
        c.swarm.generations = 2;
        c
    }

    #[test]
    fn generation_does_not_depend_on_the_thread_count() {
        let cfg = small_config();
        let pool = |n| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .unwrap()
        };
        let one = pool(1).install(|| generate_frames(&cfg, 0..5)).unwrap();
        let four = pool(4).install(|| generate_frames(&cfg, 0..5)).unwrap();
        assert_eq!(one, four);
        assert_eq!(one[3].id, "frame_000003");
    }

    #[test]
    fn hybrid_falls_back_to_the_discriminative_model() {
        let cfg = Config {
            training: crate::config::TrainingSection {
                hybrid_aware: false,
            },
            ..small_config()
        };
        let frames = generate_frames(&cfg, 0..6).unwrap();
        let models: Models = train_models(&cfg, &frames).unwrap().into();
        assert!(models.hybrid.is_none());
        assert!(std::ptr::eq(
            models.for_mode(Mode::Hybrid),
            &models.discriminative
        ));
        let out = infer(&cfg, &models, &frames[..2], Mode::Hybrid).unwrap();
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn inspect_reports_every_stage_and_generation() {
        let cfg = small_config();
        let frames = generate_frames(&cfg, 0..6).unwrap();
        let models: Models = train_models(&cfg, &frames).unwrap().into();
        let (stages, energies) = inspect(&cfg, &models, &frames[..2], Mode::Hybrid).unwrap();
        // Layer 0 has an initial and one refinement stage, fingers one each.
        assert_eq!(stages.len(), 5);
        assert_eq!(energies.len(), 2 * 4 * (cfg.swarm.generations + 1));
        assert!(inspect(&cfg, &models, &frames, Mode::Holistic).is_err());
    }
}
