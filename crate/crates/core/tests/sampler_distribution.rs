use handpose_core::hand::{forward_kinematics, HandSkeleton, MIDDLE_ROOT, WRIST};
use handpose_core::spatial::compute_rotation;
use handpose_core::synth::PoseSampler;
use nalgebra::Vector2;

/// Kolmogorov-Smirnov statistic of `x` against the uniform distribution on
/// `[lo, hi]`.
fn ks_uniform(mut x: Vec<f64>, lo: f64, hi: f64) -> f64 {
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, v)| {
            let f = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

#[test]
fn measured_in_plane_angle_is_uniform_over_the_configured_range() {
    let skel = HandSkeleton::default();
    let sampler = PoseSampler::new(&skel, 2024);
    let [lo, hi] = sampler.in_plane;
    let n = 1000;
    let angles: Vec<f64> = (0..n)
        .map(|i| {
            let pose = sampler.sample(i).pose;
            let j = forward_kinematics(&skel, &pose, 0).unwrap();
            let w = j.get(0, WRIST).unwrap();
            let m = j.get(0, MIDDLE_ROOT).unwrap();
            compute_rotation(Vector2::new(w.x, w.y), Vector2::new(m.x, m.y)).unwrap()
        })
        .collect();
    assert!(angles.iter().all(|a| *a >= lo - 1e-9 && *a <= hi + 1e-9));
    // Asymptotic critical value at alpha = 0.01.
    let critical = (-(0.01f64 / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt();
    let d = ks_uniform(angles, lo, hi);
    assert!(d < critical, "KS statistic {d} exceeds {critical}");
}

#[test]
fn ks_statistic_detects_a_wrong_range() {
    let x: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
    assert!(ks_uniform(x.clone(), 0.0, 1.0) < 1e-3);
    assert!(ks_uniform(x, 0.0, 2.0) > 0.4);
}
