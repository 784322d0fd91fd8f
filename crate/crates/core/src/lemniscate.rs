//! Estimation of a figure-eight (Bernoulli lemniscate) from 3D observations.
//!
//! The curve in its own frame `L` is the parametric figure-eight
//!
//! ```text
//! x(t) = a*sqrt(2)*cos(t) / (sin(t)^2 + 1)
//! y(t) = a*sqrt(2)*cos(t)*sin(t) / (sin(t)^2 + 1)
//! ```
//!
//! equivalently the zero set of `(x^2 + y^2)^2 = 2 a^2 (x^2 - y^2)`, where
//! `a` is the focal distance. The estimator makes no use of timing: the
//! pose of `L` comes from the centroid and principal axes of the
//! observations, `a` from robust extreme signed radii (the curve spans
//! `2*sqrt(2)*a` along its long axis), and an axial shift compensates the
//! centroid bias of unevenly distributed observations. A Gauss-Newton
//! polish then refines the in-plane registration (rotation about the
//! plane normal, in-plane translation, focal distance) against the
//! implicit curve, which removes the residual frame tilt that uneven
//! coverage leaves in the principal axes.

use alloc::vec::Vec;

use core::f64::consts::{PI, SQRT_2};

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::geometry::{Point3, RigidTransform};

/// Errors from curve fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum FitError {
    /// The observations do not determine a plane and a long axis.
    #[error("degenerate geometry: {0}")]
    Degenerate(&'static str),
    /// Observation timestamps must be strictly increasing.
    #[error("timestamps must be strictly increasing")]
    NonMonotonicTimestamps,
}

/// Time-ordered world-frame target observations, the estimator input.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservationSet {
    times: Vec<f64>,
    points: Vec<Point3>,
}

impl ObservationSet {
    /// An empty set.
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends an observation; timestamps must be strictly increasing.
    pub fn push(&mut self, time: f64, point: Point3) -> Result<(), FitError> {
        if let Some(&last) = self.times.last() {
            if time <= last {
                return Err(FitError::NonMonotonicTimestamps);
            }
        }
        self.times.push(time);
        self.points.push(point);
        Ok(())
    }

    /// Builds a set from `(time, point)` pairs.
    pub fn from_pairs<I: IntoIterator<Item = (f64, Point3)>>(pairs: I) -> Result<Self, FitError> {
        let mut set = Self::new();
        for (t, p) in pairs {
            set.push(t, p)?;
        }
        Ok(set)
    }

    /// Number of observations.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Whether the set is empty.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Observation timestamps, seconds, strictly increasing.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Observation positions in `G`.
    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    /// Time between first and last observation, seconds (0 when < 2).
    pub fn time_span(&self) -> f64 {
        match (self.times.first(), self.times.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    /// Clears all observations.
    pub fn clear(&mut self) {
        self.times.clear();
        self.points.clear();
    }
}

/// A fitted lemniscate: focal distance, pose of `L` in `G`, axial shift,
/// and a fixed-size evaluation sampling of the fitted curve.
#[derive(Debug, Clone, PartialEq)]
pub struct LemniscateEstimate {
    /// Focal distance, meters. Positive.
    pub a: f64,
    /// `T_G_L`: curve frame to world.
    pub pose: RigidTransform,
    /// Center correction along the curve's x-axis, meters.
    pub shift_x: f64,
    /// Number of evaluation samples on the fitted curve.
    pub sample_count: usize,
    /// The evaluation samples mapped to `G`.
    pub samples_g: Vec<Point3>,
}

/// Evaluates the shifted lemniscate at parameter `t`, in frame `L`.
pub fn lemniscate_point(a: f64, shift_x: f64, t: f64) -> Point3 {
    let (s, c) = t.sin_cos();
    let denom = s * s + 1.0;
    Point3::new(a * SQRT_2 * c / denom + shift_x, a * SQRT_2 * c * s / denom, 0.0)
}

/// Residual of the implicit lemniscate equation
/// `(x^2 + y^2)^2 - 2 a^2 (x^2 - y^2)` for a point in `L`, after removing
/// the axial shift. Zero (to tolerance) on the curve.
pub fn implicit_residual(a: f64, shift_x: f64, p_l: Point3) -> f64 {
    let x = p_l.x - shift_x;
    let y = p_l.y;
    let r2 = x * x + y * y;
    r2 * r2 - 2.0 * a * a * (x * x - y * y)
}

/// Samples the shifted lemniscate at `k` equally spaced parameters
/// `t = 2*PI*i/k`, `i = 0..k`, in frame `L`.
pub fn sample_lemniscate(a: f64, shift_x: f64, k: usize) -> Vec<Point3> {
    assert!(a > 0.0, "focal distance must be positive");
    assert!(k >= 4, "need at least 4 samples");
    (0..k)
        .map(|i| lemniscate_point(a, shift_x, 2.0 * PI * i as f64 / k as f64))
        .collect()
}

/// Fits the pose `T_G_L` of the observation set: translation at the
/// centroid, x along the first principal axis, z along the least principal
/// axis oriented upward (positive global z), y completing the right-handed
/// frame.
///
/// The x sign is fixed so the most recent observation has non-negative x
/// in `L` (ties broken toward global +x), which keeps the frame stable
/// across refits as observations accumulate.
pub fn fit_pose(points_g: &ObservationSet) -> Result<RigidTransform, FitError> {
    let pts = points_g.points();
    let n = pts.len();
    if n < 4 {
        return Err(FitError::Degenerate("fewer than 4 points"));
    }

    let mut centroid = Vector3::zeros();
    for p in pts {
        centroid += p.coords;
    }
    centroid /= n as f64;

    let mut cov = Matrix3::zeros();
    for p in pts {
        let d = p.coords - centroid;
        cov += d * d.transpose();
    }
    cov /= n as f64;

    let eigen = cov.symmetric_eigen();
    // Sort principal axes by decreasing variance.
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eigen.eigenvalues[j].total_cmp(&eigen.eigenvalues[i]));
    let lambda = [
        eigen.eigenvalues[order[0]],
        eigen.eigenvalues[order[1]],
        eigen.eigenvalues[order[2]],
    ];
    if lambda[0] <= 1e-18 {
        return Err(FitError::Degenerate("coincident points"));
    }
    if lambda[1] <= 1e-12 * lambda[0] {
        return Err(FitError::Degenerate("collinear points"));
    }

    let mut x_axis = eigen.eigenvectors.column(order[0]).into_owned();
    let mut z_axis = eigen.eigenvectors.column(order[2]).into_owned();

    let latest = pts[n - 1].coords - centroid;
    let along = x_axis.dot(&latest);
    if along < 0.0 || (along == 0.0 && x_axis.x < 0.0) {
        x_axis = -x_axis;
    }
    if z_axis.z < 0.0 {
        z_axis = -z_axis;
    }
    let y_axis = z_axis.cross(&x_axis);

    let rotation = Matrix3::from_columns(&[x_axis, y_axis, z_axis]);
    RigidTransform::from_parts(rotation, centroid).map_err(|_| FitError::Degenerate("unstable axes"))
}

/// Signed radius of each point in `L`: `sign(x) * |p|`, with `sign(0)`
/// treated as positive.
pub fn signed_radii(points_l: &[Point3]) -> Vec<f64> {
    points_l
        .iter()
        .map(|p| {
            let r = p.coords.norm();
            if p.x < 0.0 {
                -r
            } else {
                r
            }
        })
        .collect()
}

/// Robust extremes: `(median of the m largest, median of the m smallest)`.
/// `m` is clamped to `[1, len]`.
pub fn robust_extremes(r: &[f64], m: usize) -> (f64, f64) {
    assert!(!r.is_empty(), "need at least one radius");
    let mut sorted: Vec<f64> = r.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let m = m.clamp(1, n);
    let median = |s: &[f64]| (s[(s.len() - 1) / 2] + s[s.len() / 2]) / 2.0;
    (median(&sorted[n - m..]), median(&sorted[..m]))
}

/// Default robust-extreme window for `n` radii: `max(3, ceil(0.05 n))`.
pub fn default_extreme_window(n: usize) -> usize {
    3usize.max(n.div_ceil(20)).min(n.max(1))
}

/// Huber scale for the registration polish, meters. Residuals beyond this
/// grow linearly, so isolated gross outliers cannot steer the fit.
const REFINE_HUBER_M: f64 = 1.0;

/// Iteration cap for the registration polish.
const REFINE_MAX_ITERS: usize = 30;

/// Minimum point count before the registration polish runs; below this
/// the closed-form seed is returned unpolished.
const REFINE_MIN_POINTS: usize = 8;

/// Approximate distance from an in-plane point to the lemniscate under
/// registration parameters `[theta, tx, ty, a]`: first-order (Sampson)
/// distance `F / |grad F|` of the implicit equation, evaluated after
/// undoing the in-plane rotation `theta` and translation `(tx, ty)`.
/// The gradient norm is floored because it vanishes at the curve's
/// self-crossing.
fn registration_distance(p: Point3, params: &[f64; 4]) -> f64 {
    let [theta, tx, ty, a] = *params;
    let (s, c) = theta.sin_cos();
    let dx = p.x - tx;
    let dy = p.y - ty;
    let x = c * dx + s * dy;
    let y = -s * dx + c * dy;
    let r2 = x * x + y * y;
    let f = r2 * r2 - 2.0 * a * a * (x * x - y * y);
    let gx = 4.0 * x * (r2 - a * a);
    let gy = 4.0 * y * (r2 + a * a);
    let g = (gx * gx + gy * gy).sqrt().max(0.05 * a * a * a);
    f / g
}

/// Huber cost of the registration residuals: quadratic within
/// [`REFINE_HUBER_M`], linear beyond.
fn registration_cost(points: &[Point3], params: &[f64; 4]) -> f64 {
    points
        .iter()
        .map(|&p| {
            let r = registration_distance(p, params).abs();
            if r <= REFINE_HUBER_M {
                r * r
            } else {
                REFINE_HUBER_M * (2.0 * r - REFINE_HUBER_M)
            }
        })
        .sum()
}

/// Polishes the in-plane registration of a seeded fit by damped
/// Gauss-Newton over `[theta, tx, ty, a]` (rotation about the plane
/// normal, in-plane translation, focal distance), minimizing the Huber
/// cost of [`registration_distance`]. Residual weights follow the
/// iteratively reweighted least-squares form of the Huber loss, and each
/// step backtracks until the cost decreases. Returns the polished
/// parameters, never scoring worse than the seed, or `None` when too few
/// points are available.
fn refine_in_plane(points_l: &[Point3], a0: f64, shift0: f64) -> Option<[f64; 4]> {
    if points_l.len() < REFINE_MIN_POINTS || !(a0 > 0.0) || !a0.is_finite() {
        return None;
    }
    let mut params = [0.0, shift0, 0.0, a0];
    let mut cost = registration_cost(points_l, &params);
    for _ in 0..REFINE_MAX_ITERS {
        let scale = params[3].abs().max(1.0);
        let h = [1e-5, 1e-4 * scale, 1e-4 * scale, 1e-4 * scale];
        let mut jtj = Matrix4::<f64>::zeros();
        let mut jtr = Vector4::<f64>::zeros();
        for &q in points_l {
            let r0 = registration_distance(q, &params);
            let w = if r0.abs() <= REFINE_HUBER_M {
                1.0
            } else {
                REFINE_HUBER_M / r0.abs()
            };
            let mut row = Vector4::zeros();
            for k in 0..4 {
                let mut hi = params;
                hi[k] += h[k];
                let mut lo = params;
                lo[k] -= h[k];
                row[k] = (registration_distance(q, &hi) - registration_distance(q, &lo))
                    / (2.0 * h[k]);
            }
            jtj += w * row * row.transpose();
            jtr += w * r0 * row;
        }
        // Light Levenberg damping keeps the normal system well posed when
        // partial coverage leaves a parameter direction weakly observed.
        for k in 0..4 {
            jtj[(k, k)] += 1e-9 * (1.0 + jtj[(k, k)]);
        }
        let Some(chol) = jtj.cholesky() else {
            break;
        };
        let delta = chol.solve(&(-jtr));
        let mut step = 1.0;
        let mut accepted = false;
        while step >= 1.0 / 64.0 {
            let mut trial = params;
            for k in 0..4 {
                trial[k] += step * delta[k];
            }
            if trial[3] > 0.0 && trial.iter().all(|v| v.is_finite()) {
                let c = registration_cost(points_l, &trial);
                if c < cost {
                    params = trial;
                    cost = c;
                    accepted = true;
                    break;
                }
            }
            step /= 2.0;
        }
        if !accepted {
            break;
        }
        let tol = 1e-9 * scale;
        if delta[0].abs() < 1e-10
            && delta[1].abs() < tol
            && delta[2].abs() < tol
            && delta[3].abs() < tol
        {
            break;
        }
    }
    Some(params)
}

/// Fits a lemniscate to the observations: pose from [`fit_pose`], focal
/// distance from robust extreme signed radii (`a = (max - min) / (2*sqrt 2)`),
/// axial shift `(max + min) / 2`, plus `k` evaluation samples of the fitted
/// curve mapped to `G`. `m` is the robust-extreme window.
///
/// With at least 8 observations the closed-form seed is then polished by
/// [`refine_in_plane`]; the polished in-plane rotation and translation
/// (which absorbs the axial shift) fold into the returned pose, so
/// `shift_x` is zero on that path.
pub fn estimate(points_g: &ObservationSet, k: usize, m: usize) -> Result<LemniscateEstimate, FitError> {
    let pose = fit_pose(points_g)?;
    let to_l = pose.inverse();
    let points_l: Vec<Point3> = points_g.points().iter().map(|&p| to_l.apply(p)).collect();
    let radii = signed_radii(&points_l);
    let (max_r, min_r) = robust_extremes(&radii, m);
    let span = max_r - min_r;
    if span <= 0.0 {
        return Err(FitError::Degenerate("zero radial span"));
    }
    let mut a = span / (2.0 * SQRT_2);
    let mut shift_x = (max_r + min_r) / 2.0;
    let mut pose = pose;
    if let Some([theta, tx, ty, ra]) = refine_in_plane(&points_l, a, shift_x) {
        let (s, c) = theta.sin_cos();
        let rot = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
        if let Ok(local) = RigidTransform::from_parts(rot, Vector3::new(tx, ty, 0.0)) {
            let mut refined = pose.compose(&local);
            // Preserve the frame convention from [`fit_pose`]: the most
            // recent observation sits at non-negative x.
            let latest = *points_g.points().last().expect("checked n >= 4");
            if refined.inverse().apply(latest).x < 0.0 {
                let half_turn = RigidTransform::from_parts(
                    Matrix3::new(-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0),
                    Vector3::zeros(),
                )
                .expect("half turn is orthonormal");
                refined = refined.compose(&half_turn);
            }
            pose = refined;
            a = ra;
            shift_x = 0.0;
        }
    }
    let samples_l = sample_lemniscate(a, shift_x, k);
    let samples_g = samples_l.iter().map(|&p| pose.apply(p)).collect();
    Ok(LemniscateEstimate {
        a,
        pose,
        shift_x,
        sample_count: k,
        samples_g,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Observations on a lemniscate under `pose`, at parameters `ts`.
    fn curve_observations(a: f64, shift: f64, pose: &RigidTransform, ts: &[f64]) -> ObservationSet {
        ObservationSet::from_pairs(
            ts.iter()
                .enumerate()
                .map(|(i, &t)| (i as f64, pose.apply(lemniscate_point(a, shift, t)))),
        )
        .unwrap()
    }

    fn uniform_ts(n: usize) -> Vec<f64> {
        (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect()
    }

    fn random_pose(rng: &mut ChaCha8Rng) -> RigidTransform {
        // Random rotation via QR-like Gram-Schmidt of a random matrix with
        // handedness fixed by the constructor's checks.
        loop {
            let m = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let t = Vector3::new(
                rng.random_range(-50.0..50.0),
                rng.random_range(-50.0..50.0),
                rng.random_range(-50.0..50.0),
            );
            if let Ok(tf) = RigidTransform::from_parts(m, t) {
                return tf;
            }
        }
    }

    #[test]
    fn parametric_endpoints() {
        let a = 10.0;
        let p0 = lemniscate_point(a, 0.5, 0.0);
        assert_abs_diff_eq!(p0.x, a * SQRT_2 + 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p0.y, 0.0, epsilon = 1e-12);
        let center = lemniscate_point(a, 0.5, PI / 2.0);
        assert_abs_diff_eq!(center.x, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(center.y, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn max_height_is_half_focal_distance() {
        let a = 10.0;
        let max_y = (0..200_000)
            .map(|i| lemniscate_point(a, 0.0, 2.0 * PI * i as f64 / 200_000.0).y.abs())
            .fold(0.0, f64::max);
        assert_abs_diff_eq!(max_y, a / 2.0, epsilon = 1e-6);
    }

    #[test]
    fn samples_satisfy_implicit_equation() {
        let a = 7.3;
        let shift = -1.2;
        for p in sample_lemniscate(a, shift, 100) {
            assert!(implicit_residual(a, shift, p).abs() < 1e-9 * a.powi(4));
        }
    }

    #[test]
    fn signed_radii_examples() {
        let r = signed_radii(&[
            Point3::new(3.0, 4.0, 0.0),
            Point3::new(-3.0, 4.0, 0.0),
            Point3::new(0.0, 0.0, 0.0),
        ]);
        assert_eq!(r, vec![5.0, -5.0, 0.0]);
    }

    #[test]
    fn robust_extremes_examples() {
        let r: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(robust_extremes(&r, 3), (9.0, 2.0));
        assert_eq!(robust_extremes(&r, 1), (10.0, 1.0));

        let mut with_outlier: Vec<f64> = (1..=15).map(f64::from).collect();
        with_outlier.push(100.0);
        let (max, _) = robust_extremes(&with_outlier, 5);
        assert!(max < 20.0, "outlier must not dominate: {max}");
        assert_eq!(max, 14.0);
    }

    #[test]
    fn default_window_rule() {
        assert_eq!(default_extreme_window(4), 3);
        assert_eq!(default_extreme_window(100), 5);
        assert_eq!(default_extreme_window(500), 25);
    }

    #[test]
    fn fit_pose_planar_lemniscate() {
        let obs = curve_observations(10.0, 0.0, &RigidTransform::identity(), &uniform_ts(200));
        let pose = fit_pose(&obs).unwrap();
        assert_abs_diff_eq!(pose.translation.norm(), 0.0, epsilon = 1e-9);
        let z = pose.rotation.column(2).into_owned();
        assert_relative_eq!(z, Vector3::z(), epsilon = 1e-9);
    }

    #[test]
    fn fit_pose_recovers_rigid_motion() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let pose = random_pose(&mut rng);
            let obs = curve_observations(10.0, 0.0, &pose, &uniform_ts(240));
            let fitted = fit_pose(&obs).unwrap();
            let recovered_center = Point3::from(fitted.translation);
            let true_center = pose.apply(Point3::origin());
            assert!((recovered_center - true_center).norm() < 1e-9);
        }
    }

    #[test]
    fn fit_pose_rejects_degenerate_input() {
        let line = ObservationSet::from_pairs(
            (0..3).map(|i| (i as f64, Point3::new(i as f64, 2.0 * i as f64, 0.0))),
        )
        .unwrap();
        assert!(matches!(fit_pose(&line), Err(FitError::Degenerate(_))));

        let longer_line = ObservationSet::from_pairs(
            (0..10).map(|i| (i as f64, Point3::new(i as f64, 2.0 * i as f64, -0.5 * i as f64))),
        )
        .unwrap();
        assert!(matches!(fit_pose(&longer_line), Err(FitError::Degenerate(_))));

        let coincident =
            ObservationSet::from_pairs((0..6).map(|i| (i as f64, Point3::new(1.0, 2.0, 3.0))))
                .unwrap();
        assert!(matches!(fit_pose(&coincident), Err(FitError::Degenerate(_))));
    }

    #[test]
    fn observation_set_requires_increasing_time() {
        let mut obs = ObservationSet::new();
        obs.push(0.0, Point3::origin()).unwrap();
        assert_eq!(
            obs.push(0.0, Point3::origin()),
            Err(FitError::NonMonotonicTimestamps)
        );
        assert_eq!(
            obs.push(-1.0, Point3::origin()),
            Err(FitError::NonMonotonicTimestamps)
        );
        obs.push(0.5, Point3::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(obs.len(), 2);
        assert_abs_diff_eq!(obs.time_span(), 0.5);
    }

    #[test]
    fn estimate_recovers_focal_distance_exactly_noise_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10 {
            let pose = random_pose(&mut rng);
            let obs = curve_observations(20.0, 0.0, &pose, &uniform_ts(500));
            let est = estimate(&obs, 100, 1).unwrap();
            assert_abs_diff_eq!(est.a, 20.0, epsilon = 1e-6);
            assert_abs_diff_eq!(est.shift_x, 0.0, epsilon = 1e-6);
            assert_eq!(est.samples_g.len(), 100);
        }
    }

    #[test]
    fn estimate_t_zero_maps_to_long_axis_endpoint() {
        let obs = curve_observations(10.0, 0.0, &RigidTransform::identity(), &uniform_ts(400));
        let est = estimate(&obs, 100, 1).unwrap();
        // First evaluation sample is at t=0: the long-axis endpoint.
        let first_l = est.pose.inverse().apply(est.samples_g[0]);
        assert_abs_diff_eq!(first_l.x, est.a * SQRT_2 + est.shift_x, epsilon = 1e-9);
        assert_abs_diff_eq!(first_l.y, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn estimate_compensates_biased_sampling() {
        // Observations concentrated on one lobe bias the centroid along x;
        // the fit must re-center the curve onto the truth rather than keep
        // the biased centroid as its frame origin.
        let a = 10.0;
        let ts: Vec<f64> = (0..300)
            .map(|i| {
                let u = i as f64 / 300.0;
                // Warped parameter: dwells on the +x lobe (t near 0 / 2pi).
                2.0 * PI * (0.65 * u + 0.35 * u * u)
            })
            .collect();
        let obs = curve_observations(a, 0.0, &RigidTransform::identity(), &ts);
        let mut centroid = Vector3::zeros();
        for p in obs.points() {
            centroid += p.coords;
        }
        centroid /= obs.len() as f64;
        assert!(centroid.norm() > 0.05, "warped sampling should bias the centroid");
        let est = estimate(&obs, 100, 1).unwrap();
        let truth = sample_lemniscate(a, 0.0, 100);
        let d = crate::intercept::hausdorff_bidirectional(&est.samples_g, &truth).unwrap();
        assert!(d < 0.02 * a, "re-centered curve should overlap truth, d_H = {d}");
        assert_relative_eq!(est.a, a, max_relative = 0.02);
        // The fitted frame origin must not inherit the biased centroid.
        let origin = est.pose.apply(Point3::origin());
        assert!(
            (origin.coords - centroid).norm() > 0.01,
            "fit should correct the centroid bias"
        );
    }

    /// Parameters dwelling heavily on one quarter-arc, which tilt the
    /// covariance axes of the resulting point cloud.
    fn tilting_ts() -> Vec<f64> {
        let mut ts: Vec<f64> = (0..160).map(|i| 2.0 * PI * i as f64 / 160.0).collect();
        ts.extend((0..400).map(|i| 0.3 + 0.9 * i as f64 / 400.0));
        ts
    }

    #[test]
    fn refinement_recovers_tilted_principal_axis() {
        // A dense dwell on one arc tilts the principal axes, so the
        // closed-form seed misregisters the curve in-plane. The polish
        // must pull the registration back onto the truth.
        let a = 20.0;
        let obs = curve_observations(a, 0.0, &RigidTransform::identity(), &tilting_ts());
        let seed_pose = fit_pose(&obs).unwrap();
        let x_axis = seed_pose.rotation.column(0).into_owned();
        let tilt = x_axis.y.abs().atan2(x_axis.x.abs());
        assert!(tilt > 0.03, "scenario should tilt the seed axes, tilt = {tilt}");
        let est = estimate(&obs, 200, default_extreme_window(obs.len())).unwrap();
        let truth = sample_lemniscate(a, 0.0, 200);
        let d = crate::intercept::hausdorff_bidirectional(&est.samples_g, &truth).unwrap();
        assert!(d < 0.01 * a, "polished fit should match truth, d_H = {d}");
        assert_relative_eq!(est.a, a, max_relative = 0.01);
    }

    #[test]
    fn refinement_handles_noise_and_uneven_coverage() {
        let a = 20.0;
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let pose = random_pose(&mut rng);
        let obs = ObservationSet::from_pairs(tilting_ts().iter().enumerate().map(|(i, &t)| {
            let noise = Vector3::new(
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
            );
            (
                i as f64,
                Point3::from(pose.apply(lemniscate_point(a, 0.0, t)).coords + noise),
            )
        }))
        .unwrap();
        let est = estimate(&obs, 200, default_extreme_window(obs.len())).unwrap();
        let truth: Vec<Point3> = sample_lemniscate(a, 0.0, 200)
            .into_iter()
            .map(|p| pose.apply(p))
            .collect();
        let d = crate::intercept::hausdorff_bidirectional(&est.samples_g, &truth).unwrap();
        assert!(d < 0.05 * a, "polished fit should track truth under noise, d_H = {d}");
        assert_relative_eq!(est.a, a, max_relative = 0.05);
    }

    #[test]
    fn refinement_never_worsens_the_seed_cost() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for case in 0..10 {
            let a = rng.random_range(5.0..25.0);
            let n = 60 + 40 * case;
            let points: Vec<Point3> = (0..n)
                .map(|i| {
                    let t = 2.0 * PI * (i as f64 / n as f64).powf(1.3);
                    let p = lemniscate_point(a, 0.0, t);
                    Point3::new(
                        p.x + rng.random_range(-0.4..0.4),
                        p.y + rng.random_range(-0.4..0.4),
                        rng.random_range(-0.2..0.2),
                    )
                })
                .collect();
            let seed = [0.07 * case as f64 - 0.3, 0.5, -0.4, 0.9 * a];
            let polished =
                refine_in_plane(&points, seed[3], seed[1]).expect("enough points to polish");
            let seeded = [0.0, seed[1], 0.0, seed[3]];
            assert!(
                registration_cost(&points, &polished)
                    <= registration_cost(&points, &seeded) + 1e-12,
                "polish must not worsen the seed cost (case {case})"
            );
        }
    }

    #[test]
    fn registration_distance_approximates_point_curve_distance() {
        let a = 12.0;
        let params = [0.0, 0.0, 0.0, a];
        // On-curve points score (near) zero.
        for p in sample_lemniscate(a, 0.0, 64) {
            assert!(registration_distance(p, &params).abs() < 1e-9);
        }
        // A point offset outward from the long-axis tip scores roughly its
        // true offset.
        let tip = Point3::new(a * SQRT_2 + 0.5, 0.0, 0.0);
        let d = registration_distance(tip, &params).abs();
        assert!((d - 0.5).abs() < 0.15, "tip offset 0.5 scored {d}");
    }

    #[test]
    fn estimate_focal_distance_is_rigid_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let ts = uniform_ts(300);
        let base = curve_observations(12.0, 0.4, &RigidTransform::identity(), &ts);
        let est0 = estimate(&base, 100, 3).unwrap();
        for _ in 0..10 {
            let t = random_pose(&mut rng);
            let moved = ObservationSet::from_pairs(
                base.times()
                    .iter()
                    .zip(base.points())
                    .map(|(&time, &p)| (time, t.apply(p))),
            )
            .unwrap();
            let est1 = estimate(&moved, 100, 3).unwrap();
            assert_abs_diff_eq!(est0.a, est1.a, epsilon = 1e-9);
            assert_abs_diff_eq!(est0.shift_x.abs(), est1.shift_x.abs(), epsilon = 1e-9);
        }
    }

    #[test]
    fn estimate_scale_covariance() {
        let ts = uniform_ts(300);
        let base = curve_observations(8.0, 0.0, &RigidTransform::identity(), &ts);
        let est0 = estimate(&base, 100, 3).unwrap();
        let s = 2.5;
        // Scale about the centroid (here the origin).
        let scaled = ObservationSet::from_pairs(
            base.times()
                .iter()
                .zip(base.points())
                .map(|(&time, &p)| (time, Point3::from(p.coords * s))),
        )
        .unwrap();
        let est1 = estimate(&scaled, 100, 3).unwrap();
        assert_abs_diff_eq!(est1.a, s * est0.a, epsilon = 1e-9);
    }
}
