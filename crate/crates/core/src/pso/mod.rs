//! Kinematic refinement of one hierarchy layer at a time.
//!
//! A layer's discriminative joint estimate is converted to partial-pose
//! parameters, a Gaussian swarm is drawn around them, and an inertia-weight
//! particle swarm maximizes a prior times a silhouette-and-depth likelihood.
//! The winner is placed by forward kinematics, so its joints obey the palm
//! structure and bone lengths exactly.

mod energy;
mod refine;
mod swarm;

pub use energy::{
    distance_transform, likelihood_energy, prior_energy, Likelihood, LikelihoodConfig,
    ObservationContext, ParentLayer, PartialPose,
};
pub use refine::{
    refine_partial_pose, PartialRefinement, SwarmConfig, SwarmRefiner, LIKELIHOOD_EPSILON,
};
pub use swarm::{inertia_at, pso_step, Particle, PsoCoefficients, Swarm};
