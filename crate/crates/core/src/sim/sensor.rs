//! Synthetic detector and stereo-depth sensor.
//!
//! A detection is emitted only when the noise-free projection of the
//! target lies inside the image; the reported box center then gets pixel
//! noise, the box is clipped back to the image, and the depth patch mixes
//! Gaussian inlier samples with uniform outliers over the sensor range.
//! Targets outside the depth range produce a patch with no in-range
//! samples, which downstream reads as the saturation flag.

use alloc::vec::Vec;

// Required at the minimum supported toolchain, where f64 math is not in
// core; newer toolchains may leave it idle.
#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::depth::DepthPatch;
use crate::geometry::{Point3, RigidTransform};
use crate::tracker::{BBox, Detection};

use super::SensorConfig;

fn bbox_contains(b: &BBox, u: f64, v: f64) -> bool {
    u >= b.u && u <= b.u + b.w && v >= b.v && v <= b.v + b.h
}

/// Apparent box side for a target at depth `d`, pixels.
fn apparent_side(cfg: &SensorConfig, d: f64) -> f64 {
    let max_side = (cfg.intrinsics.width.min(cfg.intrinsics.height)) as f64;
    (cfg.intrinsics.fx * cfg.target_diagonal_m / d).clamp(4.0, max_side)
}

/// Patch sample count for a box side, bounded to keep work per frame flat.
fn patch_len(side: f64) -> usize {
    ((side * side / 16.0) as usize).clamp(32, 256)
}

/// Senses the target once. `t_g_c` is the camera-to-global transform at
/// the frame time; `roi` is the active detector window, if any, which
/// raises the detection probability when it covers the target.
///
/// Returns `None` when the target is behind the camera, projects outside
/// the image, or the detection coin fails.
pub fn sense<R: Rng + ?Sized>(
    target_g: &Point3,
    t_g_c: &RigidTransform,
    cfg: &SensorConfig,
    roi: Option<&BBox>,
    timestamp: f64,
    rng: &mut R,
) -> Option<Detection> {
    let p_c = t_g_c.inverse().apply(*target_g);
    let (u, v) = cfg.intrinsics.project(p_c)?;
    if !cfg.intrinsics.contains(u, v) {
        return None;
    }

    let mut p = cfg.detection_probability;
    if roi.is_some_and(|r| bbox_contains(r, u, v)) {
        p = (p + cfg.roi_detection_bonus).min(1.0);
    }
    if rng.random::<f64>() >= p {
        return None;
    }

    let d = p_c.z;
    let side = apparent_side(cfg, d);
    let pixel = Normal::new(0.0, cfg.pixel_noise_sigma).expect("sigma is non-negative");
    let cu = u + pixel.sample(rng);
    let cv = v + pixel.sample(rng);

    let (w, h) = (cfg.intrinsics.width as f64, cfg.intrinsics.height as f64);
    let u0 = (cu - side / 2.0).max(0.0);
    let v0 = (cv - side / 2.0).max(0.0);
    let u1 = (cu + side / 2.0).min(w);
    let v1 = (cv + side / 2.0).min(h);
    if u1 - u0 < 1.0 || v1 - v0 < 1.0 {
        // Noise pushed the box (almost) fully out of frame.
        return None;
    }
    let bbox = BBox {
        u: u0,
        v: v0,
        w: u1 - u0,
        h: v1 - v0,
    };
    let (center_u, center_v) = bbox.center();

    let n = patch_len(side);
    let depth_noise = Normal::new(0.0, cfg.depth_noise_sigma).expect("sigma is non-negative");
    let in_range = d >= cfg.range_min && d <= cfg.range_max;
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        if in_range && rng.random::<f64>() < cfg.outlier_fraction {
            samples.push(rng.random_range(cfg.range_min..cfg.range_max));
        } else {
            samples.push(d + depth_noise.sample(rng));
        }
    }
    let patch =
        DepthPatch::new(samples, cfg.range_min, cfg.range_max).expect("valid range and samples");

    Some(Detection {
        bbox,
        center_u,
        center_v,
        timestamp,
        patch,
    })
}

/// A spurious detection: uniform position and size, pure clutter depth.
pub fn false_positive<R: Rng + ?Sized>(
    cfg: &SensorConfig,
    timestamp: f64,
    rng: &mut R,
) -> Detection {
    let (w, h) = (cfg.intrinsics.width as f64, cfg.intrinsics.height as f64);
    let side = rng.random_range(8.0..60.0);
    let cu = rng.random_range(side / 2.0..w - side / 2.0);
    let cv = rng.random_range(side / 2.0..h - side / 2.0);
    let n = patch_len(side);
    let samples: Vec<f64> = (0..n)
        .map(|_| rng.random_range(cfg.range_min..cfg.range_max))
        .collect();
    let patch =
        DepthPatch::new(samples, cfg.range_min, cfg.range_max).expect("valid range and samples");
    Detection {
        bbox: BBox::from_center(cu, cv, side, side),
        center_u: cu,
        center_v: cv,
        timestamp,
        patch,
    }
}
