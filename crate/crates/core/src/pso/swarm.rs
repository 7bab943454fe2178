use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// One swarm member. Each particle owns its random stream, so results do
/// not depend on the order particles are visited in.
#[derive(Clone, Debug)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub best_position: Vec<f64>,
    pub best_energy: f64,
    rng: ChaCha8Rng,
}

impl Particle {
    pub fn new(position: Vec<f64>, rng: ChaCha8Rng) -> Self {
        let dim = position.len();
        Self {
            best_position: position.clone(),
            position,
            velocity: alloc::vec![0.0; dim],
            best_energy: f64::NEG_INFINITY,
            rng,
        }
    }
}

/// Shi-Eberhart velocity weights for one generation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsoCoefficients {
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
}

/// Particles plus the best position any of them has visited. Energies are
/// maximized; NaN counts as negative infinity.
#[derive(Clone, Debug)]
pub struct Swarm {
    pub particles: Vec<Particle>,
    pub global_best: Vec<f64>,
    pub global_best_energy: f64,
    /// Global-best energy after initialization and after every step.
    pub trace: Vec<f64>,
}

fn sane(e: f64) -> f64 {
    if e.is_nan() {
        f64::NEG_INFINITY
    } else {
        e
    }
}

impl Swarm {
    /// Evaluates the initial positions. Panics on an empty particle list.
    pub fn new(mut particles: Vec<Particle>, mut energy: impl FnMut(&[f64]) -> f64) -> Self {
        assert!(!particles.is_empty(), "a swarm needs at least one particle");
        for p in &mut particles {
            p.best_energy = sane(energy(&p.position));
            p.best_position.clone_from(&p.position);
        }
        let mut swarm = Self {
            global_best: particles[0].best_position.clone(),
            global_best_energy: particles[0].best_energy,
            particles,
            trace: Vec::new(),
        };
        swarm.update_global();
        swarm.trace.push(swarm.global_best_energy);
        swarm
    }

    fn update_global(&mut self) {
        for p in &self.particles {
            if p.best_energy > self.global_best_energy {
                self.global_best_energy = p.best_energy;
                self.global_best.clone_from(&p.best_position);
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.global_best.len()
    }
}

/// One synchronous generation.
///
/// `v <- w v + c1 r1 (pbest - x) + c2 r2 (gbest - x)` with `r1`, `r2` drawn
/// per coordinate, velocity clamped to `[-vmax, vmax]` per coordinate,
/// `x <- project(x + v)`. Personal bests update immediately; the global best
/// updates once every particle has moved.
pub fn pso_step(
    swarm: &mut Swarm,
    coefficients: PsoCoefficients,
    vmax: &[f64],
    mut project: impl FnMut(&mut [f64]),
    mut energy: impl FnMut(&[f64]) -> f64,
) {
    let PsoCoefficients {
        inertia,
        cognitive,
        social,
    } = coefficients;
    let gbest = swarm.global_best.clone();
    for p in &mut swarm.particles {
        for k in 0..p.position.len() {
            let r1: f64 = p.rng.random();
            let r2: f64 = p.rng.random();
            let x = p.position[k];
            let v = inertia * p.velocity[k]
                + cognitive * r1 * (p.best_position[k] - x)
                + social * r2 * (gbest[k] - x);
            let v = v.clamp(-vmax[k], vmax[k]);
            p.velocity[k] = v;
            p.position[k] = x + v;
        }
        project(&mut p.position);
        let e = sane(energy(&p.position));
        if e > p.best_energy {
            p.best_energy = e;
            p.best_position.clone_from(&p.position);
        }
    }
    swarm.update_global();
    swarm.trace.push(swarm.global_best_energy);
}

/// Inertia for generation `g` of `n`, decaying linearly from `start` to `end`.
pub fn inertia_at(start: f64, end: f64, g: usize, n: usize) -> f64 {
    if n <= 1 {
        start
    } else {
        start + (end - start) * g as f64 / (n - 1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn swarm(n: usize, dim: usize, seed: u64, energy: impl FnMut(&[f64]) -> f64) -> Swarm {
        let particles = (0..n)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                let normal = Normal::new(0.5, 1.0).unwrap();
                let pos = (0..dim).map(|_| normal.sample(&mut rng)).collect();
                Particle::new(pos, rng)
            })
            .collect();
        Swarm::new(particles, energy)
    }

    fn bowl(x: &[f64]) -> f64 {
        -x.iter().map(|v| v * v).sum::<f64>()
    }

    #[test]
    fn frozen_swarm_does_not_move() {
        let mut s = swarm(10, 3, 1, bowl);
        let before: Vec<_> = s.particles.iter().map(|p| p.position.clone()).collect();
        let c = PsoCoefficients {
            inertia: 0.0,
            cognitive: 0.0,
            social: 0.0,
        };
        pso_step(&mut s, c, &[1.0; 3], |_| {}, bowl);
        let after: Vec<_> = s.particles.iter().map(|p| p.position.clone()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn quadratic_bowl_converges() {
        let mut s = swarm(100, 2, 7, bowl);
        for g in 0..50 {
            let c = PsoCoefficients {
                inertia: inertia_at(0.9, 0.4, g, 50),
                cognitive: 2.0,
                social: 2.0,
            };
            pso_step(&mut s, c, &[3.0; 2], |_| {}, bowl);
        }
        assert!(
            s.global_best.iter().all(|v| v.abs() < 1e-3),
            "{:?}",
            s.global_best
        );
    }

    #[test]
    fn nan_energy_never_becomes_best() {
        let e = |x: &[f64]| if x[0] > 0.0 { f64::NAN } else { -x[0] * x[0] };
        let mut s = swarm(20, 1, 3, e);
        for _ in 0..5 {
            let c = PsoCoefficients {
                inertia: 0.7,
                cognitive: 2.0,
                social: 2.0,
            };
            pso_step(&mut s, c, &[1.0], |_| {}, e);
        }
        assert!(!s.global_best_energy.is_nan());
        assert!(s.global_best[0] <= 0.0);
    }

    #[test]
    fn schedule_endpoints() {
        assert_eq!(inertia_at(0.9, 0.4, 0, 5), 0.9);
        assert!((inertia_at(0.9, 0.4, 4, 5) - 0.4).abs() < 1e-15);
        assert_eq!(inertia_at(0.9, 0.4, 0, 1), 0.9);
        assert_eq!(vec![inertia_at(1.0, 0.0, 1, 3)], vec![0.5]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]
            #[test]
            fn global_best_is_monotone(seed in 0u64..1000, a in -3.0f64..3.0, b in 0.1f64..5.0) {
                // Rugged energy: bowl plus a ripple.
                let e = move |x: &[f64]| -x.iter().map(|v| (v - a) * (v - a) - libm::cos(b * v)).sum::<f64>();
                let mut s = swarm(16, 3, seed, e);
                for g in 0..8 {
                    let c = PsoCoefficients { inertia: inertia_at(0.9, 0.4, g, 8), cognitive: 2.0, social: 2.0 };
                    pso_step(&mut s, c, &[2.0; 3], |_| {}, e);
                }
                prop_assert!(s.trace.windows(2).all(|w| w[1] >= w[0]));
            }
        }
    }
}
