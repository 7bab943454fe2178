use nalgebra::{Matrix2, Vector2, Vector3};

use crate::hand::JointLocations;
use crate::math::{atan2, cos, sin, wrap_angle};
use crate::{Error, Result};

/// The attention transform `(theta, t, b)`.
///
/// A patch point `p_o` maps to the source point
/// `p_i = b * M(theta) * p_o + t` with `M = [[cos, sin], [-sin, cos]]`.
/// `b` is the patch width as a fraction of the source width; attention
/// transforms have `b` in `(0, 1]`, their inverses carry `1 / b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineTransform2D {
    theta: f64,
    t: Vector2<f64>,
    b: f64,
}

fn rotation(theta: f64) -> Matrix2<f64> {
    let (s, c) = (sin(theta), cos(theta));
    Matrix2::new(c, s, -s, c)
}

impl AffineTransform2D {
    pub fn new(theta: f64, t: Vector2<f64>, b: f64) -> Result<Self> {
        if !(b > 0.0 && b <= 1.0) {
            return Err(Error::InvalidParameter(alloc::format!(
                "crop ratio {b} outside (0, 1]"
            )));
        }
        if !theta.is_finite() || !t.x.is_finite() || !t.y.is_finite() {
            return Err(Error::InvalidParameter(
                "non-finite transform parameter".into(),
            ));
        }
        Ok(Self {
            theta: wrap_angle(theta),
            t,
            b,
        })
    }

    /// `theta = 0, t = 0, b = 1`: maps every point to itself.
    pub fn identity() -> Self {
        Self {
            theta: 0.0,
            t: Vector2::zeros(),
            b: 1.0,
        }
    }

    /// Whole-image view: resampling through it reproduces the source grid.
    pub fn full_view() -> Self {
        Self {
            theta: 0.0,
            t: Vector2::new(0.5, 0.5),
            b: 1.0,
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn translation(&self) -> Vector2<f64> {
        self.t
    }

    pub fn crop_ratio(&self) -> f64 {
        self.b
    }

    /// Source coordinates of the patch point `p_out`; no clamping.
    pub fn map_point(&self, p_out: Vector2<f64>) -> Vector2<f64> {
        self.b * (rotation(self.theta) * p_out) + self.t
    }

    /// Patch coordinates of the source point `p_in`; the exact inverse of
    /// [`AffineTransform2D::map_point`].
    pub fn unmap_point(&self, p_in: Vector2<f64>) -> Vector2<f64> {
        rotation(self.theta).transpose() * (p_in - self.t) / self.b
    }

    /// Algebraic inverse: `theta -> -theta`, `b -> 1 / b` and
    /// `t -> -(1 / b) * M(-theta) * t`.
    pub fn inverse(&self) -> Self {
        let theta = wrap_angle(-self.theta);
        Self {
            theta,
            t: -(rotation(theta) * self.t) / self.b,
            b: 1.0 / self.b,
        }
    }
}

/// Which way labels travel through a transform.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Source space to patch space.
    Forward,
    /// Patch space back to source space.
    Inverse,
}

/// Maps the xy of every joint between source and patch space; z is copied.
pub fn transform_points(
    transform: &AffineTransform2D,
    joints: &JointLocations,
    direction: Direction,
) -> JointLocations {
    let mut out = joints.clone();
    for p in out.points_mut() {
        *p = transform_point3(transform, p, direction);
    }
    out
}

pub(crate) fn transform_point3(
    transform: &AffineTransform2D,
    p: &Vector3<f64>,
    direction: Direction,
) -> Vector3<f64> {
    let xy = Vector2::new(p.x, p.y);
    let m = match direction {
        Direction::Forward => transform.unmap_point(xy),
        Direction::Inverse => transform.map_point(xy),
    };
    Vector3::new(m.x, m.y, p.z)
}

/// In-plane rotation of the hand: the signed angle from the upright
/// direction to the wrist-to-middle-root vector, in `(-pi, pi]`.
///
/// Upright means the vector points up the image (toward smaller y). Angles
/// are measured counter-clockwise as seen on screen. Using this angle as the
/// transform's `theta` makes the wrist-to-middle-root vector point straight
/// up in the patch.
pub fn compute_rotation(wrist: Vector2<f64>, middle_root: Vector2<f64>) -> Result<f64> {
    let v = middle_root - wrist;
    if !(v.norm() > 0.0) {
        return Err(Error::UndefinedOrientation);
    }
    Ok(wrap_angle(atan2(-v.x, -v.y)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{FRAC_PI_2, PI};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_transform(rng: &mut ChaCha8Rng) -> AffineTransform2D {
        AffineTransform2D::new(
            rng.random_range(-PI..PI),
            Vector2::new(rng.random_range(-1.0..2.0), rng.random_range(-1.0..2.0)),
            rng.random_range(0.01..=1.0),
        )
        .unwrap()
    }

    #[test]
    fn identity_maps_point_to_itself() {
        let p = Vector2::new(0.3, 0.7);
        assert_eq!(AffineTransform2D::identity().map_point(p), p);
    }

    #[test]
    fn patch_origin_lands_on_attention_center() {
        let t = AffineTransform2D::new(0.0, Vector2::new(0.5, 0.5), 0.5).unwrap();
        assert_eq!(t.map_point(Vector2::zeros()), Vector2::new(0.5, 0.5));
        // patch corner (-0.5, -0.5) lands a quarter image away
        assert_eq!(
            t.map_point(Vector2::new(-0.5, -0.5)),
            Vector2::new(0.25, 0.25)
        );
    }

    #[test]
    fn half_turn_negates_offsets() {
        let t = AffineTransform2D::new(PI, Vector2::zeros(), 1.0).unwrap();
        let q = t.map_point(Vector2::new(0.1, 0.2));
        assert!((q - Vector2::new(-0.1, -0.2)).norm() < 1e-15);
    }

    #[test]
    fn pure_rotation_preserves_length_when_b_is_one() {
        let t = AffineTransform2D::new(0.7, Vector2::zeros(), 1.0).unwrap();
        let p = Vector2::new(0.3, -0.4);
        assert!((t.map_point(p).norm() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_crop_ratio() {
        assert!(AffineTransform2D::new(0.0, Vector2::zeros(), 0.0).is_err());
        assert!(AffineTransform2D::new(0.0, Vector2::zeros(), 1.5).is_err());
        assert!(AffineTransform2D::new(0.0, Vector2::zeros(), f64::NAN).is_err());
    }

    #[test]
    fn inverse_roundtrips() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let t = random_transform(&mut rng);
            let p = Vector2::new(rng.random_range(-1.0..2.0), rng.random_range(-1.0..2.0));
            assert!((t.inverse().map_point(t.map_point(p)) - p).norm() < 1e-12);
            assert!((t.unmap_point(t.map_point(p)) - p).norm() < 1e-12);
            let back = t.inverse().inverse();
            assert!((back.theta - t.theta).abs() < 1e-12);
            assert!((back.t - t.t).norm() < 1e-12);
            assert!((back.b - t.b).abs() < 1e-12);
        }
    }

    #[test]
    fn upright_hand_has_zero_rotation() {
        let theta = compute_rotation(Vector2::new(0.5, 0.8), Vector2::new(0.5, 0.2)).unwrap();
        assert_eq!(theta, 0.0);
    }

    #[test]
    fn quarter_turn_sign() {
        // middle root to the right of the wrist: clockwise on screen
        let theta = compute_rotation(Vector2::new(0.5, 0.5), Vector2::new(0.8, 0.5)).unwrap();
        assert!((theta + FRAC_PI_2).abs() < 1e-15);
        let theta = compute_rotation(Vector2::new(0.5, 0.5), Vector2::new(0.2, 0.5)).unwrap();
        assert!((theta - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn coincident_points_are_rejected() {
        let p = Vector2::new(0.4, 0.4);
        assert_eq!(compute_rotation(p, p), Err(Error::UndefinedOrientation));
    }

    #[test]
    fn attention_makes_hand_upright() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let w = Vector2::new(rng.random(), rng.random());
            let m = Vector2::new(rng.random(), rng.random());
            let theta = compute_rotation(w, m).unwrap();
            let t = AffineTransform2D::new(theta, w, 1.0).unwrap();
            let v = t.unmap_point(m) - t.unmap_point(w);
            assert!(v.x.abs() < 1e-12 && v.y < 0.0);
        }
    }

    #[test]
    fn z_passes_through() {
        use crate::hand::{JointLocations, LayerSet};
        let pts = alloc::vec![Vector3::new(0.2, 0.3, 1.234_567); 6];
        let joints = JointLocations::new(LayerSet::single(0), pts).unwrap();
        let t = AffineTransform2D::new(1.0, Vector2::new(0.4, 0.6), 0.3).unwrap();
        let fwd = transform_points(&t, &joints, Direction::Forward);
        let back = transform_points(&t, &fwd, Direction::Inverse);
        for ((a, b), c) in joints.points().iter().zip(back.points()).zip(fwd.points()) {
            assert!((a - b).norm() < 1e-12);
            assert_eq!(a.z.to_bits(), b.z.to_bits());
            assert_eq!(a.z.to_bits(), c.z.to_bits());
        }
    }
}
