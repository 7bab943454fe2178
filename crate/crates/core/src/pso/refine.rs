use alloc::{vec, vec::Vec};

use nalgebra::{Quaternion, Rotation3, UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::energy::{
    likelihood_energy, prior_energy, ObservationContext, ParentLayer, PartialPose,
};
use super::swarm::{inertia_at, pso_step, Particle, PsoCoefficients, Swarm};
use crate::cascade::LayerRefiner;
use crate::hand::{
    infer_bone_rotations, infer_global_pose, palm_frames, place_layer, place_palm, GlobalPose,
    HandSkeleton, JointLocations, LayerAngles, FINGER_COUNT, PALM_JOINT_COUNT,
};
use crate::math::{log, sqrt};
use crate::synth::DepthFrame;
use crate::{Error, Result};

use super::energy::LikelihoodConfig;

/// Offset added to the likelihood before taking its logarithm.
pub const LIKELIHOOD_EPSILON: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SwarmConfig {
    pub particles: usize,
    pub generations: usize,
    pub inertia_start: f64,
    pub inertia_end: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Per-coordinate velocity bound, in sampling std-devs.
    pub velocity_clamp: f64,
    pub sigma_translation: f64,
    /// Radians.
    pub sigma_rotation: f64,
    /// Radians, every bone angle.
    pub sigma_angle: f64,
    pub seed: u64,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            particles: 100,
            generations: 5,
            inertia_start: 0.9,
            inertia_end: 0.4,
            cognitive: 2.0,
            social: 2.0,
            velocity_clamp: 3.0,
            sigma_translation: 0.02,
            sigma_rotation: 10f64.to_radians(),
            sigma_angle: 12f64.to_radians(),
            seed: 0,
        }
    }
}

impl SwarmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 || self.generations == 0 {
            return Err(Error::InvalidParameter(
                "swarm needs particles and generations".into(),
            ));
        }
        let sigmas = [
            self.sigma_translation,
            self.sigma_rotation,
            self.sigma_angle,
        ];
        if sigmas.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidParameter(
                "sampling std-devs must be positive".into(),
            ));
        }
        if !(self.velocity_clamp > 0.0) {
            return Err(Error::InvalidParameter(
                "velocity clamp must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Prior std-devs: `[rotation, tx, ty, tz]` for layer 0, fifteen angle
    /// std-devs otherwise.
    pub fn prior_sigma(&self, layer: usize) -> Vec<f64> {
        if layer == 0 {
            let t = self.sigma_translation;
            vec![self.sigma_rotation, t, t, t]
        } else {
            vec![self.sigma_angle; 3 * FINGER_COUNT]
        }
    }

    /// Std-dev scale of each encoded coordinate. A rotation by `a` moves the
    /// quaternion components by about `a / 2`.
    fn coordinate_sigma(&self, layer: usize) -> Vec<f64> {
        if layer == 0 {
            let q = 0.5 * self.sigma_rotation;
            let t = self.sigma_translation;
            vec![q, q, q, q, t, t, t]
        } else {
            vec![self.sigma_angle; 3 * FINGER_COUNT]
        }
    }
}

/// Result of optimizing one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialRefinement {
    pub layer: usize,
    /// Joints of the layer placed by forward kinematics from `pose`.
    pub joints: Vec<Vector3<f64>>,
    pub pose: PartialPose,
    /// Frames of the bones ending at this layer's joints; for layer 0 the
    /// wrist-to-root bones.
    pub frames: [Rotation3<f64>; FINGER_COUNT],
    /// Energy of the kinematic initialization.
    pub initial_energy: f64,
    pub best_energy: f64,
    /// Global-best energy after initialization and after every generation.
    pub trace: Vec<f64>,
    /// The silhouette was empty; the optimization used the prior alone.
    pub empty_silhouette: bool,
    /// The initialization hit a degenerate case: a rank-deficient palm fit
    /// or a zero-length bone.
    pub degenerate: bool,
}

impl PartialRefinement {
    /// This layer as the parent of the next one.
    pub fn as_parent(&self) -> ParentLayer {
        let start = if self.layer == 0 { 1 } else { 0 };
        ParentLayer {
            joints: core::array::from_fn(|f| self.joints[start + f]),
            frames: self.frames,
        }
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Encoding of one layer's parameters as a flat vector.
struct Layout<'a> {
    layer: usize,
    skeleton: &'a HandSkeleton,
    mean: Vec<f64>,
    parents: Option<&'a ParentLayer>,
}

impl Layout<'_> {
    fn project(&self, x: &mut [f64]) {
        if self.layer == 0 {
            let n = sqrt(x[..4].iter().map(|v| v * v).sum::<f64>());
            if !(n > 1e-12) || !n.is_finite() {
                x[..4].copy_from_slice(&self.mean[..4]);
                return;
            }
            let dot: f64 = x[..4].iter().zip(&self.mean[..4]).map(|(a, b)| a * b).sum();
            let s = if dot < 0.0 { -1.0 / n } else { 1.0 / n };
            x[..4].iter_mut().for_each(|v| *v *= s);
        } else {
            for (k, v) in x.iter_mut().enumerate() {
                let c = if v.is_finite() { *v } else { self.mean[k] };
                *v = self.skeleton.limits.clamp(self.layer, k % 3, c);
            }
        }
    }

    fn decode(&self, x: &[f64]) -> PartialPose {
        if self.layer == 0 {
            PartialPose::Global(GlobalPose {
                rotation: UnitQuaternion::new_unchecked(Quaternion::new(x[0], x[1], x[2], x[3])),
                translation: Vector3::new(x[4], x[5], x[6]),
            })
        } else {
            PartialPose::Angles(core::array::from_fn(|f| {
                [x[3 * f], x[3 * f + 1], x[3 * f + 2]]
            }))
        }
    }

    fn place(&self, pose: &PartialPose) -> (Vec<Vector3<f64>>, [Rotation3<f64>; FINGER_COUNT]) {
        match pose {
            PartialPose::Global(g) => (
                place_palm(self.skeleton, g).to_vec(),
                palm_frames(self.skeleton, g),
            ),
            PartialPose::Angles(a) => {
                let p = self.parents.expect("finger layers carry parents");
                let (j, f) = place_layer(self.skeleton, self.layer, &p.joints, &p.frames, a);
                (j.to_vec(), f)
            }
        }
    }
}

/// Optimizes the partial pose of `layer` around the kinematic fit of
/// `cnn_joints` and returns joints placed by forward kinematics, which
/// satisfy the palm structure and bone lengths exactly.
///
/// Particle 0 starts at the fit itself; the others are Gaussian draws around
/// it. The energy is `log P + log(Q + 1e-6)`. Finger layers read their
/// parents from `ctx.parents`.
pub fn refine_partial_pose(
    layer: usize,
    cnn_joints: &JointLocations,
    ctx: &ObservationContext,
    cfg: &SwarmConfig,
) -> Result<PartialRefinement> {
    cfg.validate()?;
    let skeleton = &ctx.skeleton;
    let observed = cnn_joints.layer(layer).ok_or_else(|| {
        Error::JointSetMismatch(alloc::format!("layer {layer} missing from the estimate"))
    })?;
    if observed.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(Error::InvalidParameter(
            "estimate has non-finite joints".into(),
        ));
    }

    let (mean, degenerate, parents) = if layer == 0 {
        let fit = infer_global_pose(skeleton, observed)?;
        (PartialPose::Global(fit.pose), fit.rank_deficient, None)
    } else {
        let parents = ctx.parents.as_ref().ok_or_else(|| {
            Error::InvalidParameter(alloc::format!("layer {layer} needs parent joints"))
        })?;
        let here: [Vector3<f64>; FINGER_COUNT] = core::array::from_fn(|f| observed[f]);
        let rot = infer_bone_rotations(skeleton, layer, &here, &parents.joints, &parents.frames)?;
        let mut angles: LayerAngles = rot.angles;
        for a in angles.iter_mut() {
            for (c, v) in a.iter_mut().enumerate() {
                *v = skeleton.limits.clamp(layer, c, *v);
            }
        }
        (
            PartialPose::Angles(angles),
            rot.degenerate.iter().any(|d| *d),
            Some(parents),
        )
    };
    let mean_vec: Vec<f64> = match &mean {
        PartialPose::Global(g) => g.to_vector().to_vec(),
        PartialPose::Angles(a) => a.iter().flatten().copied().collect(),
    };
    let layout = Layout {
        layer,
        skeleton,
        mean: mean_vec.clone(),
        parents,
    };
    let prior_sigma = cfg.prior_sigma(layer);
    let empty = ctx.silhouette_is_empty();
    let energy = |x: &[f64]| -> f64 {
        let pose = layout.decode(x);
        let (joints, _) = layout.place(&pose);
        let prior = prior_energy(&pose, &mean, &prior_sigma).unwrap_or(f64::NEG_INFINITY);
        prior + log(likelihood_energy(&joints, ctx).score + LIKELIHOOD_EPSILON)
    };

    let base = splitmix(cfg.seed ^ splitmix(ctx.stream ^ splitmix(layer as u64)));
    let coord_sigma = cfg.coordinate_sigma(layer);
    let particles: Vec<Particle> = (0..cfg.particles)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(base);
            rng.set_stream(i as u64);
            let mut x = mean_vec.clone();
            if i > 0 {
                match &mean {
                    PartialPose::Global(g) => {
                        let w = Vector3::from_fn(|_, _| gaussian(&mut rng) * cfg.sigma_rotation);
                        let t = Vector3::from_fn(|_, _| gaussian(&mut rng) * cfg.sigma_translation);
                        let sample = GlobalPose {
                            rotation: UnitQuaternion::from_scaled_axis(w) * g.rotation,
                            translation: g.translation + t,
                        };
                        x = sample.to_vector().to_vec();
                    }
                    PartialPose::Angles(_) => {
                        for v in x.iter_mut() {
                            *v += gaussian(&mut rng) * cfg.sigma_angle;
                        }
                    }
                }
            }
            layout.project(&mut x);
            Particle::new(x, rng)
        })
        .collect();

    let mut swarm = Swarm::new(particles, energy);
    let initial_energy = energy(&layout.mean);
    let vmax: Vec<f64> = coord_sigma.iter().map(|s| s * cfg.velocity_clamp).collect();
    for g in 0..cfg.generations {
        let c = PsoCoefficients {
            inertia: inertia_at(cfg.inertia_start, cfg.inertia_end, g, cfg.generations),
            cognitive: cfg.cognitive,
            social: cfg.social,
        };
        pso_step(&mut swarm, c, &vmax, |x| layout.project(x), energy);
    }

    let mut pose = layout.decode(&swarm.global_best);
    if let PartialPose::Global(g) = &mut pose {
        g.rotation = UnitQuaternion::from_quaternion(*g.rotation.quaternion());
        *g = g.canonical();
    }
    let (joints, frames) = layout.place(&pose);
    debug_assert!(layer != 0 || joints.len() == PALM_JOINT_COUNT);
    Ok(PartialRefinement {
        layer,
        joints,
        pose,
        frames,
        initial_energy,
        best_energy: swarm.global_best_energy,
        trace: swarm.trace,
        empty_silhouette: empty,
        degenerate,
    })
}

/// Hybrid-mode hook: replaces each layer's discriminative estimate by its
/// swarm refinement and chains the refined layer in as the next parent.
#[derive(Clone, Debug)]
pub struct SwarmRefiner {
    pub ctx: ObservationContext,
    pub config: SwarmConfig,
    /// Refinements of the layers processed so far.
    pub history: Vec<PartialRefinement>,
}

impl SwarmRefiner {
    pub fn new(
        frame: &DepthFrame,
        skeleton: &HandSkeleton,
        likelihood: LikelihoodConfig,
        config: SwarmConfig,
        stream: u64,
    ) -> Result<Self> {
        Ok(Self {
            ctx: ObservationContext::new(frame, skeleton, likelihood)?.with_stream(stream),
            config,
            history: Vec::new(),
        })
    }
}

impl LayerRefiner for SwarmRefiner {
    fn refine_layer(
        &mut self,
        layer: usize,
        estimate: &[Vector3<f64>],
        _frame: &DepthFrame,
    ) -> Result<Vec<Vector3<f64>>> {
        let joints = JointLocations::from_layer(layer, estimate)?;
        let r = refine_partial_pose(layer, &joints, &self.ctx, &self.config)?;
        self.ctx.parents = Some(r.as_parent());
        let out = r.joints.clone();
        self.history.push(r);
        Ok(out)
    }
}
