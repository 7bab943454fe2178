use nalgebra::{Vector2, Vector3};

use super::frame::{Camera, DepthFrame};
use crate::hand::{forward_kinematics, HandSkeleton, PoseParams, FINGER_COUNT};
use crate::math::sqrt;
use crate::spatial::RasterGrid;
use crate::{Error, Result};

struct ZBuffer<'a> {
    camera: &'a Camera,
    depth: RasterGrid,
}

impl ZBuffer<'_> {
    fn pixel_center(&self, i: usize, j: usize) -> Vector2<f64> {
        Vector2::new(
            (i as f64 + 0.5) / self.camera.width as f64,
            (j as f64 + 0.5) / self.camera.height as f64,
        )
    }

    /// Pixel index range whose centers may fall within `[lo, hi]` normalized.
    fn span(&self, lo: f64, hi: f64, n: usize) -> core::ops::Range<usize> {
        let a = libm::floor(lo * n as f64 - 0.5).max(0.0);
        let b = (libm::ceil(hi * n as f64 - 0.5) + 1.0).min(n as f64);
        if b <= a {
            0..0
        } else {
            a as usize..b as usize
        }
    }

    fn write(&mut self, i: usize, j: usize, z: f64) {
        if z < self.depth.get(i, j) {
            self.depth.set(i, j, z);
        }
    }

    /// Sphere-swept segment: the front surface seen by each orthographic ray
    /// is the nearest front point over spheres sampled densely along the axis.
    fn capsule(&mut self, a: Vector3<f64>, b: Vector3<f64>, r: f64) {
        let steps = (libm::ceil((b - a).norm() / (0.1 * r)) as usize).clamp(1, 256);
        let xs = self.span(a.x.min(b.x) - r, a.x.max(b.x) + r, self.camera.width);
        let ys = self.span(a.y.min(b.y) - r, a.y.max(b.y) + r, self.camera.height);
        for j in ys {
            for i in xs.clone() {
                let c = self.pixel_center(i, j);
                let mut best = f64::INFINITY;
                for k in 0..=steps {
                    let p = a + (b - a) * (k as f64 / steps as f64);
                    let d2 = (p.x - c.x) * (p.x - c.x) + (p.y - c.y) * (p.y - c.y);
                    if d2 <= r * r {
                        best = best.min(p.z - sqrt(r * r - d2));
                    }
                }
                // exact closest point in xy, so thin grazing hits are not missed
                let ab = Vector2::new(b.x - a.x, b.y - a.y);
                let s = if ab.norm_squared() > 0.0 {
                    ((c - Vector2::new(a.x, a.y)).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let p = a + (b - a) * s;
                let d2 = (p.x - c.x) * (p.x - c.x) + (p.y - c.y) * (p.y - c.y);
                if d2 <= r * r {
                    best = best.min(p.z - sqrt(r * r - d2));
                }
                if best.is_finite() {
                    self.write(i, j, best);
                }
            }
        }
    }

    /// Flat triangle pushed toward the camera by `r`.
    fn slab(&mut self, a: Vector3<f64>, b: Vector3<f64>, c: Vector3<f64>, r: f64) {
        let area = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
        if area.abs() < 1e-14 {
            return;
        }
        let xs = self.span(
            a.x.min(b.x).min(c.x),
            a.x.max(b.x).max(c.x),
            self.camera.width,
        );
        let ys = self.span(
            a.y.min(b.y).min(c.y),
            a.y.max(b.y).max(c.y),
            self.camera.height,
        );
        for j in ys {
            for i in xs.clone() {
                let p = self.pixel_center(i, j);
                let w0 = ((b.x - p.x) * (c.y - p.y) - (c.x - p.x) * (b.y - p.y)) / area;
                let w1 = ((c.x - p.x) * (a.y - p.y) - (a.x - p.x) * (c.y - p.y)) / area;
                let w2 = 1.0 - w0 - w1;
                if w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0 {
                    self.write(i, j, w0 * a.z + w1 * b.z + w2 * c.z - r);
                }
            }
        }
    }
}

/// Renders the depth image of `pose`.
///
/// Bones are capsules with the skeleton's per-layer radii. The palm is the
/// wrist-to-root fan filled as a slab plus capsules along its edges, an
/// approximation of the convex hull of the palm spheres.
pub fn render(pose: &PoseParams, skeleton: &HandSkeleton, camera: &Camera) -> Result<DepthFrame> {
    let joints = forward_kinematics(skeleton, pose, 3)?;
    let depth = RasterGrid::filled(
        camera.width,
        camera.height,
        camera.background_depth,
        camera.background_depth,
    )?;
    let mut zb = ZBuffer { camera, depth };
    let palm = joints.layer(0).expect("layer 0 present");
    let r = skeleton.palm_radius;
    for f in 1..=FINGER_COUNT {
        zb.capsule(palm[0], palm[f], r);
        if f < FINGER_COUNT {
            zb.capsule(palm[f], palm[f + 1], r);
            zb.slab(palm[0], palm[f], palm[f + 1], r);
        }
    }
    for layer in 1..=3 {
        let here = joints.layer(layer).expect("finger layer present");
        let parent = joints.layer(layer - 1).expect("parent layer present");
        let offset = if layer == 1 { 1 } else { 0 };
        for f in 0..FINGER_COUNT {
            zb.capsule(parent[f + offset], here[f], skeleton.bone_radii[layer - 1]);
        }
    }
    let frame = DepthFrame::from_depth(zb.depth, *camera)?;
    if !frame.mask().iter().any(|&m| m) {
        return Err(Error::OutsideFrame);
    }
    Ok(frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::PoseSampler;

    #[test]
    fn joints_lie_on_rendered_geometry() {
        let skel = HandSkeleton::default();
        let camera = Camera::default();
        let sampler = PoseSampler::new(&skel, 42);
        for i in 0..50 {
            let s = sampler.sample(i);
            let frame = render(&s.pose, &skel, &camera).unwrap();
            let joints = forward_kinematics(&skel, &s.pose, 3).unwrap();
            for p in joints.points() {
                let (x, y) = camera.pixel_of(p).expect("joint inside frame");
                assert!(frame.is_hand(x, y));
                assert!(frame.depth().get(x, y) <= p.z);
            }
        }
    }

    #[test]
    fn translation_shifts_render() {
        let skel = HandSkeleton::default();
        let camera = Camera::default();
        let sampler = PoseSampler::new(&skel, 3);
        let pose = sampler.sample(0).pose;
        let base = render(&pose, &skel, &camera).unwrap();
        let (dx, dy) = (5usize, 3usize);
        let mut moved = pose.clone();
        moved.global.translation += Vector3::new(dx as f64 / 96.0, dy as f64 / 96.0, 0.0);
        let shifted = render(&moved, &skel, &camera).unwrap();
        let mut mismatched = 0;
        let mut compared = 0;
        for y in 0..96 - dy {
            for x in 0..96 - dx {
                let a = base.depth().get(x, y);
                let b = shifted.depth().get(x + dx, y + dy);
                compared += 1;
                if (a - b).abs() > 1e-9 {
                    mismatched += 1;
                }
            }
        }
        // pixel-center rounding may flip a handful of silhouette-edge pixels
        assert!(
            mismatched * 200 < compared,
            "{mismatched} of {compared} differ"
        );
    }

    #[test]
    fn deterministic() {
        let skel = HandSkeleton::default();
        let pose = PoseSampler::new(&skel, 1).sample(4).pose;
        let a = render(&pose, &skel, &Camera::default()).unwrap();
        let b = render(&pose, &skel, &Camera::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn outside_frame_is_an_error() {
        let skel = HandSkeleton::default();
        let mut pose = PoseParams::identity();
        pose.global.translation = Vector3::new(5.0, 5.0, 1.0);
        assert_eq!(
            render(&pose, &skel, &Camera::default()).unwrap_err(),
            Error::OutsideFrame
        );
    }
}
