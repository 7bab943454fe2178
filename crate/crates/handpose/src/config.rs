//! The run configuration: one TOML document shared by every subcommand.
//!
//! Missing sections and fields take their defaults; unknown keys are
//! rejected so that typos do not silently fall back to defaults.

use std::path::Path;

use handpose_core::cascade::CascadeConfig;
use handpose_core::hand::{AngleLimits, HandSkeleton};
use handpose_core::metric::Aggregation;
use handpose_core::pso::{LikelihoodConfig, SwarmConfig};
use handpose_core::synth::{Camera, PoseSampler};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    /// Drives pose sampling; `--seed` overrides it together with the swarm
    /// seed.
    pub seed: u64,
    pub skeleton: HandSkeleton,
    pub camera: Camera,
    pub sampler: SamplerSection,
    pub dataset: DatasetSection,
    pub cascade: CascadeConfig,
    pub training: TrainingSection,
    pub swarm: SwarmConfig,
    pub likelihood: LikelihoodConfig,
    pub eval: EvalSection,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            skeleton: HandSkeleton::default(),
            camera: Camera::default(),
            sampler: SamplerSection::default(),
            dataset: DatasetSection::default(),
            cascade: CascadeConfig::default(),
            training: TrainingSection::default(),
            swarm: SwarmConfig::default(),
            likelihood: LikelihoodConfig::default(),
            eval: EvalSection::default(),
        }
    }
}

/// Pose sampling ranges; the seed comes from the top level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub in_plane: [f64; 2],
    pub tilt: f64,
    pub center_jitter: f64,
    pub depth: [f64; 2],
    /// Defaults to the narrow sampling ranges, or the skeleton's limits when
    /// those do not contain them.
    pub limits: Option<AngleLimits>,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let s = PoseSampler::new(&HandSkeleton::default(), 0);
        Self {
            in_plane: s.in_plane,
            tilt: s.tilt,
            center_jitter: s.center_jitter,
            depth: s.depth,
            limits: None,
        }
    }
}

impl SamplerSection {
    pub fn build(&self, skeleton: &HandSkeleton, seed: u64) -> PoseSampler {
        let mut s = PoseSampler::new(skeleton, seed);
        s.in_plane = self.in_plane;
        s.tilt = self.tilt;
        s.center_jitter = self.center_jitter;
        s.depth = self.depth;
        if let Some(l) = &self.limits {
            s.limits = l.clone();
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub train_frames: usize,
    pub test_frames: usize,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            train_frames: 1600,
            test_frames: 400,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    /// Also train a second model whose finger layers see swarm-refined
    /// parents; hybrid inference uses it when present.
    pub hybrid_aware: bool,
}

impl Default for TrainingSection {
    fn default() -> Self {
        Self { hybrid_aware: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub thresholds: usize,
    /// Upper threshold is half of this; defaults to the skeleton's span.
    pub span: Option<f64>,
    pub aggregation: Aggregation,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            thresholds: 40,
            span: None,
            aggregation: Aggregation::Pooled,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Sets the sampling and swarm seeds.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.swarm.seed = seed;
        self
    }

    pub fn sampler(&self) -> PoseSampler {
        self.sampler.build(&self.skeleton, self.seed)
    }

    pub fn thresholds(&self) -> Vec<f64> {
        handpose_core::metric::default_thresholds(
            self.eval.span.unwrap_or_else(|| self.skeleton.hand_span()),
            self.eval.thresholds,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let core = |r: handpose_core::Result<()>, section: &str| {
            r.map_err(|e| Error::Config(format!("[{section}] {e}")))
        };
        core(self.skeleton.validate(), "skeleton")?;
        core(self.cascade.validate(), "cascade")?;
        core(self.swarm.validate(), "swarm")?;
        core(self.likelihood.validate(), "likelihood")?;
        if self.camera.width == 0 || self.camera.height == 0 {
            return Err(Error::Config("[camera] dimensions must be >= 1".into()));
        }
        let s = &self.sampler;
        if !(s.in_plane[0] <= s.in_plane[1])
            || !(s.depth[0] <= s.depth[1])
            || !(s.tilt >= 0.0)
            || !(s.center_jitter >= 0.0)
        {
            return Err(Error::Config("[sampler] ranges must be ordered".into()));
        }
        if let Some(l) = &s.limits {
            if !l.within(&self.skeleton.limits) {
                return Err(Error::Config(
                    "[sampler] limits exceed the skeleton's angle limits".into(),
                ));
            }
        }
        if let Some(span) = self.eval.span {
            if !(span > 0.0) {
                return Err(Error::Config("[eval] span must be positive".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_roundtrips_through_toml() {
        let cfg = Config::default();
        assert_eq!(Config::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn empty_document_is_the_default() {
        assert_eq!(Config::from_toml("").unwrap(), Config::default());
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let cfg = Config::from_toml("seed = 7\n[swarm]\nparticles = 20\n").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.swarm.particles, 20);
        assert_eq!(cfg.swarm.generations, SwarmConfig::default().generations);
    }

    #[test]
    fn rejects_unknown_keys_and_versions() {
        assert!(matches!(
            Config::from_toml("[swarm]\nparticle = 3\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            Config::from_toml("schema_version = 2\n"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn rejects_invalid_values() {
        assert!(Config::from_toml("[swarm]\nparticles = 0\n").is_err());
        assert!(Config::from_toml("[sampler]\ndepth = [1.2, 0.9]\n").is_err());
    }

    #[test]
    fn seed_reaches_sampler_and_swarm() {
        let cfg = Config::default().with_seed(42);
        assert_eq!(cfg.sampler().seed, 42);
        assert_eq!(cfg.swarm.seed, 42);
    }
}
