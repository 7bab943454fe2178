use alloc::{vec, vec::Vec};

use nalgebra::{Rotation3, Vector3};
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::hand::{GlobalPose, HandSkeleton, LayerAngles, FINGER_COUNT};
use crate::math::{floor, sqrt};
use crate::synth::DepthFrame;
use crate::{Error, Result};

/// Parameters of one hierarchy layer: the global rigid pose for layer 0,
/// five bone-angle triples otherwise.
#[derive(Clone, Debug, PartialEq)]
pub enum PartialPose {
    Global(GlobalPose),
    Angles(LayerAngles),
}

impl PartialPose {
    /// 7 for the global pose, 15 for a finger layer.
    pub fn dim(&self) -> usize {
        match self {
            PartialPose::Global(_) => 7,
            PartialPose::Angles(_) => 3 * FINGER_COUNT,
        }
    }
}

/// Diagonal-Gaussian log-density of `sample` around `mean`, up to a
/// constant.
///
/// For the global pose `sigma` is `[rotation, tx, ty, tz]` and the rotation
/// deviation is the angle between the two quaternions. For a finger layer
/// `sigma` holds one value per angle, finger-major.
pub fn prior_energy(sample: &PartialPose, mean: &PartialPose, sigma: &[f64]) -> Result<f64> {
    let sq = |d: f64, s: f64| (d / s) * (d / s);
    match (sample, mean) {
        (PartialPose::Global(a), PartialPose::Global(b)) => {
            if sigma.len() != 4 {
                return Err(Error::DimensionMismatch(
                    "global prior needs 4 std-devs".into(),
                ));
            }
            let angle = a.rotation.angle_to(&b.rotation);
            let dt = a.translation - b.translation;
            Ok(-0.5 * (sq(angle, sigma[0]) + (0..3).map(|k| sq(dt[k], sigma[k + 1])).sum::<f64>()))
        }
        (PartialPose::Angles(a), PartialPose::Angles(b)) => {
            if sigma.len() != 3 * FINGER_COUNT {
                return Err(Error::DimensionMismatch(
                    "finger prior needs 15 std-devs".into(),
                ));
            }
            let mut s = 0.0;
            for f in 0..FINGER_COUNT {
                for c in 0..3 {
                    s += sq(a[f][c] - b[f][c], sigma[3 * f + c]);
                }
            }
            Ok(-0.5 * s)
        }
        _ => Err(Error::DimensionMismatch(
            "prior over mismatched partial poses".into(),
        )),
    }
}

/// Euclidean distance, in pixels, from every pixel to the nearest `true`
/// pixel; infinite everywhere when no pixel is set.
///
/// Exact two-pass lower-envelope transform (Felzenszwalb and Huttenlocher).
pub fn distance_transform(mask: &[bool], width: usize, height: usize) -> Vec<f64> {
    assert_eq!(mask.len(), width * height, "mask size");
    if !mask.iter().any(|m| *m) {
        return vec![f64::INFINITY; mask.len()];
    }
    const FAR: f64 = 1e20;
    let mut sq: Vec<f64> = mask.iter().map(|&m| if m { 0.0 } else { FAR }).collect();
    let n = width.max(height);
    let mut f = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    for x in 0..width {
        for y in 0..height {
            f[y] = sq[y * width + x];
        }
        envelope(&f[..height], &mut d[..height], &mut v, &mut z);
        for y in 0..height {
            sq[y * width + x] = d[y];
        }
    }
    for y in 0..height {
        f[..width].copy_from_slice(&sq[y * width..(y + 1) * width]);
        envelope(&f[..width], &mut d[..width], &mut v, &mut z);
        sq[y * width..(y + 1) * width].copy_from_slice(&d[..width]);
    }
    sq.into_iter().map(sqrt).collect()
}

// Squared distance transform of a sampled 1-D function.
fn envelope(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let qf = q as f64;
        loop {
            let p = v[k] as f64;
            let s = ((f[q] + qf * qf) - (f[v[k]] + p * p)) / (2.0 * qf - 2.0 * p);
            // z[0] is -inf, so k never underflows.
            if s <= z[k] {
                k -= 1;
                continue;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    k = 0;
    for q in 0..n {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let p = v[k] as f64;
        d[q] = (qf - p) * (qf - p) + f[v[k]];
    }
}

/// Shape of the silhouette and depth-band scores.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct LikelihoodConfig {
    /// Distance off the silhouette, pixels, at which the silhouette score
    /// reaches zero.
    pub silhouette_cutoff_px: f64,
    /// Depth distance outside the band at which the depth score reaches zero.
    pub depth_cutoff: f64,
    /// Lower and upper percentiles of the silhouette depths bounding the band.
    pub band_percentiles: [f64; 2],
}

impl Default for LikelihoodConfig {
    fn default() -> Self {
        Self {
            silhouette_cutoff_px: 8.0,
            depth_cutoff: 0.05,
            band_percentiles: [0.05, 0.95],
        }
    }
}

impl LikelihoodConfig {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.band_percentiles;
        if !(self.silhouette_cutoff_px > 0.0 && self.depth_cutoff > 0.0) {
            return Err(Error::InvalidParameter(
                "likelihood cutoffs must be positive".into(),
            ));
        }
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(Error::InvalidParameter(
                "band percentiles must satisfy 0 <= lo <= hi <= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Joints and bone frames of the layer a finger layer hangs from.
#[derive(Clone, Debug, PartialEq)]
pub struct ParentLayer {
    pub joints: [Vector3<f64>; FINGER_COUNT],
    pub frames: [Rotation3<f64>; FINGER_COUNT],
}

/// Linearly interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = floor(pos) as usize;
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + (sorted[j] - sorted[i]) * (pos - i as f64)
}

/// Everything the energy reads from one observed frame.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationContext {
    width: usize,
    height: usize,
    mask: Vec<bool>,
    distance: Vec<f64>,
    band: Option<[f64; 2]>,
    pub skeleton: HandSkeleton,
    pub config: LikelihoodConfig,
    /// Parent layer for finger-layer refinement.
    pub parents: Option<ParentLayer>,
    /// Distinguishes the random streams of different frames.
    pub stream: u64,
}

impl ObservationContext {
    pub fn new(
        frame: &DepthFrame,
        skeleton: &HandSkeleton,
        config: LikelihoodConfig,
    ) -> Result<Self> {
        Self::from_parts(
            frame.mask().to_vec(),
            &frame.hand_depths(),
            frame.width(),
            frame.height(),
            skeleton,
            config,
        )
    }

    /// Context from a silhouette mask and the depths of its pixels.
    pub fn from_parts(
        mask: Vec<bool>,
        hand_depths: &[f64],
        width: usize,
        height: usize,
        skeleton: &HandSkeleton,
        config: LikelihoodConfig,
    ) -> Result<Self> {
        config.validate()?;
        if mask.len() != width * height {
            return Err(Error::DimensionMismatch(alloc::format!(
                "mask of {} pixels for a {width}x{height} frame",
                mask.len()
            )));
        }
        let distance = distance_transform(&mask, width, height);
        let mut depths: Vec<f64> = hand_depths
            .iter()
            .copied()
            .filter(|d| d.is_finite())
            .collect();
        depths.sort_by(f64::total_cmp);
        let band = (!depths.is_empty()).then(|| {
            let [lo, hi] = config.band_percentiles;
            [quantile(&depths, lo), quantile(&depths, hi)]
        });
        Ok(Self {
            width,
            height,
            mask,
            distance,
            band,
            skeleton: skeleton.clone(),
            config,
            parents: None,
            stream: 0,
        })
    }

    pub fn with_parents(mut self, parents: ParentLayer) -> Self {
        self.parents = Some(parents);
        self
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn silhouette_is_empty(&self) -> bool {
        !self.mask.iter().any(|m| *m)
    }

    /// `[lower, upper]` depth band, absent for an empty silhouette.
    pub fn depth_band(&self) -> Option<[f64; 2]> {
        self.band
    }

    fn pixel(&self, p: &Vector3<f64>) -> Option<usize> {
        let x = floor(p.x * self.width as f64);
        let y = floor(p.y * self.height as f64);
        if x >= 0.0 && y >= 0.0 && x < self.width as f64 && y < self.height as f64 {
            Some(y as usize * self.width + x as usize)
        } else {
            None
        }
    }

    /// Silhouette and depth scores of one joint, each in `[0, 1]`.
    pub fn joint_scores(&self, p: &Vector3<f64>) -> (f64, f64) {
        let (Some(i), Some([lo, hi])) = (self.pixel(p), self.band) else {
            return (0.0, 0.0);
        };
        if !p.iter().all(|c| c.is_finite()) {
            return (0.0, 0.0);
        }
        let b = if self.mask[i] {
            1.0
        } else {
            (1.0 - self.distance[i] / self.config.silhouette_cutoff_px).max(0.0)
        };
        let off = if p.z < lo {
            lo - p.z
        } else if p.z > hi {
            p.z - hi
        } else {
            0.0
        };
        let d = (1.0 - off / self.config.depth_cutoff).max(0.0);
        (b, d)
    }
}

/// Data term of a set of joints.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Likelihood {
    /// Sum of silhouette plus depth scores over the joints; at most two per
    /// joint.
    pub score: f64,
    /// The silhouette was empty and the score is zero by convention.
    pub empty_silhouette: bool,
}

pub fn likelihood_energy(joints: &[Vector3<f64>], ctx: &ObservationContext) -> Likelihood {
    if ctx.silhouette_is_empty() {
        return Likelihood {
            score: 0.0,
            empty_silhouette: true,
        };
    }
    let score = joints
        .iter()
        .map(|p| {
            let (b, d) = ctx.joint_scores(p);
            b + d
        })
        .sum();
    Likelihood {
        score,
        empty_silhouette: false,
    }
}
