//! Estimate validation and interception pose computation.
//!
//! The fitted curve is accepted only when the bidirectional Hausdorff
//! distance between the accumulated measurements and a fixed sampling of
//! the fitted curve drops below a fraction of the focal distance. Once the
//! fit converges and the target's traversal direction is identified from
//! measurement ordering, the interception pose is the end of the central
//! near-straight segment (curve parameter `t = PI/4` or `3*PI/4`), with the
//! yaw facing back along the segment toward the incoming target.

use alloc::vec;
use alloc::vec::Vec;

use core::f64::consts::FRAC_PI_4;

use nalgebra::Vector3;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::geometry::{wrap_angle, Point3};
use crate::lemniscate::{
    default_extreme_window, estimate, lemniscate_point, FitError, LemniscateEstimate, ObservationSet,
};

/// Minimum cross-product votes before a traversal direction is decided.
pub const MIN_DIRECTION_VOTES: usize = 5;
/// Decision threshold on the swept-area score, as a fraction of `a^2`.
pub const DIRECTION_MAGNITUDE_FACTOR: f64 = 0.05;
/// Minimum lobe-center offset along x, as a fraction of `a`, for the
/// points to be attributable to one lobe.
pub const DIRECTION_LOBE_FACTOR: f64 = 0.05;

/// Errors from estimate validation and direction identification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum InterceptError {
    /// Hausdorff distances require non-empty point sets.
    #[error("empty point set")]
    EmptySet,
    /// The traversal direction cannot be determined from these points.
    #[error("traversal direction undecided")]
    DirectionUndecided,
}

/// Traversal direction of the figure-eight.
///
/// `Cw` labels the traversal with increasing curve parameter `t`: the
/// target runs the central straight segment from the `t = PI/4` point
/// toward the `t = 3*PI/4` point. Around the +x lobe this motion appears
/// clockwise with image-style axes (y down); viewed from `L`'s +z (y up)
/// it appears counterclockwise. `Ccw` is the reverse traversal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Increasing curve parameter.
    Cw,
    /// Decreasing curve parameter.
    Ccw,
}

impl Direction {
    /// The opposite traversal.
    pub fn reversed(self) -> Self {
        match self {
            Direction::Cw => Direction::Ccw,
            Direction::Ccw => Direction::Cw,
        }
    }
}

/// The computed interception pose on the fitted curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterceptPose {
    /// Interception position in `G`.
    pub position_g: Point3,
    /// Yaw in `G` facing the incoming target, normalized to `(-PI, PI]`.
    pub yaw_g: f64,
    /// Traversal direction the pose was computed for.
    pub direction: Direction,
    /// Curve parameter of the interception point (`PI/4` or `3*PI/4`).
    pub t_i: f64,
    /// Curve parameter of the point the pose faces toward.
    pub t_t: f64,
}

/// Result of one convergence check of measurements against an estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// Bidirectional Hausdorff distance, meters.
    pub d_h: f64,
    /// Focal distance of the checked estimate, meters.
    pub a: f64,
    /// `d_h / a`.
    pub ratio: f64,
    /// Whether `ratio < threshold`.
    pub converged: bool,
    /// `(measurement count, d_h)` samples; a single entry here, extended
    /// across refits by [`TrajectoryEstimator`].
    pub history: Vec<(usize, f64)>,
}

/// Directed Hausdorff distance: `max over x of min over y of |x - y|`.
/// Exact O(nm) scan.
pub fn hausdorff_directed(x: &[Point3], y: &[Point3]) -> Result<f64, InterceptError> {
    if x.is_empty() || y.is_empty() {
        return Err(InterceptError::EmptySet);
    }
    let mut worst = 0.0f64;
    for p in x {
        let mut best = f64::INFINITY;
        for q in y {
            let d = (p - q).norm();
            if d < best {
                best = d;
            }
        }
        if best > worst {
            worst = best;
        }
    }
    Ok(worst)
}

/// Bidirectional Hausdorff distance: the larger of the two directed ones.
pub fn hausdorff_bidirectional(x: &[Point3], y: &[Point3]) -> Result<f64, InterceptError> {
    Ok(hausdorff_directed(x, y)?.max(hausdorff_directed(y, x)?))
}

/// Checks measurements against the fitted curve's evaluation samples:
/// converged iff `d_H / a < threshold`.
pub fn check_convergence(
    measurements_g: &[Point3],
    est: &LemniscateEstimate,
    threshold: f64,
) -> Result<ConvergenceReport, InterceptError> {
    let d_h = hausdorff_bidirectional(measurements_g, &est.samples_g)?;
    let ratio = d_h / est.a;
    Ok(ConvergenceReport {
        d_h,
        a: est.a,
        ratio,
        converged: ratio < threshold,
        history: vec![(measurements_g.len(), d_h)],
    })
}

/// Swept-area score of one single-lobe run: z-components of cross
/// products of point offsets about the run centroid, taken at a stride of
/// roughly a tenth of the run so measurement noise averages out, summed
/// and divided by the stride. The result approximates twice the signed
/// area swept about the centroid, a sampling-rate-independent quantity
/// whose sign gives the orbital sense. Returns `(score, centroid x)`, or
/// `None` when the run cannot supply [`MIN_DIRECTION_VOTES`] votes.
fn lobe_run_score(run: &[Point3]) -> Option<(f64, f64)> {
    let n = run.len();
    let stride = (n / 10).max(1);
    if n < stride + MIN_DIRECTION_VOTES {
        return None;
    }
    let mut center = Vector3::zeros();
    for p in run {
        center += p.coords;
    }
    center /= n as f64;
    let mut sum = 0.0;
    for i in 0..n - stride {
        let u = run[i].coords - center;
        let v = run[i + stride].coords - center;
        sum += u.x * v.y - u.y * v.x;
    }
    Some((sum / stride as f64, center.x))
}

/// Identifies the traversal direction from time-ordered points inside one
/// lobe, expressed in `L`.
///
/// The run's swept-area score maps to a traversal direction once
/// multiplied by the lobe's side (the two lobes of a figure-eight have
/// opposite handedness). Undecided unless there are at least
/// [`MIN_DIRECTION_VOTES`] votes, a decisive score magnitude, and a clear
/// lobe side.
pub fn identify_direction(points_l: &[Point3], a: f64) -> Result<Direction, InterceptError> {
    if points_l.len() < MIN_DIRECTION_VOTES + 1 {
        return Err(InterceptError::DirectionUndecided);
    }
    let (score, center_x) =
        lobe_run_score(points_l).ok_or(InterceptError::DirectionUndecided)?;
    if center_x.abs() < DIRECTION_LOBE_FACTOR * a {
        return Err(InterceptError::DirectionUndecided);
    }
    if score.abs() < DIRECTION_MAGNITUDE_FACTOR * a * a {
        return Err(InterceptError::DirectionUndecided);
    }
    // Orbit sense times lobe side: positive means increasing parameter.
    if score * center_x.signum() > 0.0 {
        Ok(Direction::Cw)
    } else {
        Ok(Direction::Ccw)
    }
}

/// Identifies the traversal direction from a full time-ordered point
/// stream in `L`, covering any number of lobe passes.
///
/// The stream is segmented into maximal runs of consecutive points on one
/// side of the curve center (|x| at least 0.1·a); each run long enough
/// for the vote minimum is scored as in [`identify_direction`] and its
/// score, signed by the lobe side, is added to a running total. Every
/// pass over either lobe therefore reinforces the decision, making the
/// outcome independent of where along the curve the stream happens to
/// end. Undecided when no run qualifies or the total is not decisive.
pub fn identify_direction_stream(
    points_l: &[Point3],
    a: f64,
) -> Result<Direction, InterceptError> {
    let min_x = 2.0 * DIRECTION_LOBE_FACTOR * a;
    let mut total = 0.0;
    let mut run: Vec<Point3> = Vec::new();
    let mut side = 0.0;
    let flush = |run: &mut Vec<Point3>, total: &mut f64| {
        if let Some((score, center_x)) = lobe_run_score(run) {
            if center_x.abs() >= DIRECTION_LOBE_FACTOR * a {
                *total += score * center_x.signum();
            }
        }
        run.clear();
    };
    for p in points_l {
        let s = if p.x.abs() < min_x { 0.0 } else { p.x.signum() };
        if s != side {
            flush(&mut run, &mut total);
            side = s;
        }
        if s != 0.0 {
            run.push(*p);
        }
    }
    flush(&mut run, &mut total);
    if total.abs() < DIRECTION_MAGNITUDE_FACTOR * a * a {
        return Err(InterceptError::DirectionUndecided);
    }
    Ok(if total > 0.0 {
        Direction::Cw
    } else {
        Direction::Ccw
    })
}

/// Computes the interception pose for a converged estimate: park at the
/// end of the central straight segment (`t_i = 3*PI/4` for `Cw`, `PI/4`
/// for `Ccw`) facing the segment's other end, from which the target
/// arrives.
pub fn intercept_pose(est: &LemniscateEstimate, direction: Direction) -> InterceptPose {
    let (t_i, t_t) = match direction {
        Direction::Cw => (3.0 * FRAC_PI_4, FRAC_PI_4),
        Direction::Ccw => (FRAC_PI_4, 3.0 * FRAC_PI_4),
    };
    let p_i = lemniscate_point(est.a, est.shift_x, t_i);
    let p_t = lemniscate_point(est.a, est.shift_x, t_t);
    let psi_l = (p_t.y - p_i.y).atan2(p_t.x - p_i.x);

    let position_g = est.pose.apply(p_i);
    let facing_g = est.pose.rotate(Vector3::new(psi_l.cos(), psi_l.sin(), 0.0));
    let yaw_g = wrap_angle(facing_g.y.atan2(facing_g.x));

    InterceptPose {
        position_g,
        yaw_g,
        direction,
        t_i,
        t_t,
    }
}

/// Configuration of the online estimation loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    /// Minimum buffered observations before the first fit.
    pub min_points: usize,
    /// Minimum time span of the buffer before the first fit, seconds.
    pub min_time_span: f64,
    /// Evaluation samples per fitted curve.
    pub curve_samples: usize,
    /// Convergence gate on `d_H / a`.
    pub threshold: f64,
    /// A frozen solution is discarded when `d_H / a` exceeds
    /// `rearm_factor * threshold`.
    pub rearm_factor: f64,
    /// Consecutive converged checks required before committing a
    /// solution; 1 commits on the first. Debouncing skips one-off dips of
    /// a still-moving fit under the gate.
    pub commit_checks: usize,
    /// Robust-extreme window; `None` selects `max(3, ceil(0.05 n))`.
    pub extreme_window: Option<usize>,
    /// Admit measurements whose depth came from the out-of-range fallback.
    pub use_saturated_measurements: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            min_points: 10,
            min_time_span: 2.0,
            curve_samples: 100,
            threshold: 0.15,
            rearm_factor: 2.0,
            commit_checks: 3,
            extreme_window: None,
            use_saturated_measurements: false,
        }
    }
}

/// A committed interception solution.
#[derive(Debug, Clone, PartialEq)]
pub struct InterceptSolution {
    /// The estimate the solution was computed from.
    pub estimate: LemniscateEstimate,
    /// Identified traversal direction.
    pub direction: Direction,
    /// The interception pose.
    pub pose: InterceptPose,
    /// Observation time at which the gate passed, seconds.
    pub converged_at: f64,
    /// Buffered observation count at convergence.
    pub point_count: usize,
}

/// Outcome of feeding one observation to the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PushOutcome {
    /// Buffer below the minimum size or time span; no fit attempted.
    Pending,
    /// A fit/check ran. `newly_converged` marks the push that committed a
    /// solution; `rearmed` marks a push that discarded one.
    Checked {
        /// A solution was committed on this push.
        newly_converged: bool,
        /// The frozen solution was discarded on this push.
        rearmed: bool,
    },
}

/// Online estimation driver: buffers measurements, refits the curve on
/// every new one (once warmed up), gates convergence, identifies the
/// traversal direction, and freezes the interception solution.
///
/// A frozen solution stops refitting; new measurements are instead checked
/// against the frozen curve, and the solution is discarded (re-armed) if
/// their Hausdorff ratio degrades past `rearm_factor * threshold`.
#[derive(Debug, Clone)]
pub struct TrajectoryEstimator {
    cfg: EstimatorConfig,
    observations: ObservationSet,
    history: Vec<(usize, f64, f64)>,
    converged_streak: usize,
    latest_estimate: Option<LemniscateEstimate>,
    latest_report: Option<ConvergenceReport>,
    solution: Option<InterceptSolution>,
}

impl TrajectoryEstimator {
    /// Creates an empty estimator.
    pub fn new(cfg: EstimatorConfig) -> Self {
        Self {
            cfg,
            observations: ObservationSet::new(),
            history: Vec::new(),
            converged_streak: 0,
            latest_estimate: None,
            latest_report: None,
            solution: None,
        }
    }

    /// The configuration in use.
    pub fn config(&self) -> &EstimatorConfig {
        &self.cfg
    }

    /// Buffered observations.
    pub fn observations(&self) -> &ObservationSet {
        &self.observations
    }

    /// `(point count, d_H, fitted a)` per fit/check, across the whole
    /// mission. While frozen, the fitted a is the committed one.
    pub fn history(&self) -> &[(usize, f64, f64)] {
        &self.history
    }

    /// Most recent fitted estimate, if any fit has run.
    pub fn latest_estimate(&self) -> Option<&LemniscateEstimate> {
        self.latest_estimate.as_ref()
    }

    /// Most recent convergence report, if any check has run.
    pub fn latest_report(&self) -> Option<&ConvergenceReport> {
        self.latest_report.as_ref()
    }

    /// The committed solution, while frozen.
    pub fn solution(&self) -> Option<&InterceptSolution> {
        self.solution.as_ref()
    }

    /// Drops all state (buffer, history, solution).
    pub fn reset(&mut self) {
        self.observations.clear();
        self.history.clear();
        self.converged_streak = 0;
        self.latest_estimate = None;
        self.latest_report = None;
        self.solution = None;
    }

    /// Feeds one measurement; see [`PushOutcome`]. Errors only on
    /// non-increasing timestamps.
    pub fn push(&mut self, time: f64, point_g: Point3) -> Result<PushOutcome, FitError> {
        self.observations.push(time, point_g)?;
        let n = self.observations.len();
        if n < self.cfg.min_points || self.observations.time_span() < self.cfg.min_time_span {
            return Ok(PushOutcome::Pending);
        }

        let mut rearmed = false;
        if let Some(sol) = &self.solution {
            // Frozen: check the data against the committed curve only.
            let report = check_convergence(
                self.observations.points(),
                &sol.estimate,
                self.cfg.threshold,
            )
            .expect("buffer and samples are non-empty");
            self.history.push((n, report.d_h, sol.estimate.a));
            let degraded = report.ratio > self.cfg.rearm_factor * self.cfg.threshold;
            self.latest_report = Some(report);
            if !degraded {
                return Ok(PushOutcome::Checked {
                    newly_converged: false,
                    rearmed: false,
                });
            }
            self.solution = None;
            self.converged_streak = 0;
            rearmed = true;
        }

        let m = self
            .cfg
            .extreme_window
            .unwrap_or_else(|| default_extreme_window(n));
        let est = match estimate(&self.observations, self.cfg.curve_samples, m) {
            Ok(est) => est,
            // Transient degenerate geometry: keep collecting.
            Err(_) => {
                self.converged_streak = 0;
                return Ok(PushOutcome::Checked {
                    newly_converged: false,
                    rearmed,
                });
            }
        };
        let report = check_convergence(self.observations.points(), &est, self.cfg.threshold)
            .expect("buffer and samples are non-empty");
        self.history.push((n, report.d_h, est.a));

        let mut newly_converged = false;
        if report.converged {
            self.converged_streak += 1;
            if self.converged_streak >= self.cfg.commit_checks {
                let to_l = est.pose.inverse();
                let points_l: Vec<Point3> = self
                    .observations
                    .points()
                    .iter()
                    .map(|p| to_l.apply(*p))
                    .collect();
                if let Ok(direction) = identify_direction_stream(&points_l, est.a) {
                    let pose = intercept_pose(&est, direction);
                    self.solution = Some(InterceptSolution {
                        estimate: est.clone(),
                        direction,
                        pose,
                        converged_at: time,
                        point_count: n,
                    });
                    newly_converged = true;
                }
            }
        } else {
            self.converged_streak = 0;
        }
        self.latest_estimate = Some(est);
        self.latest_report = Some(report);
        Ok(PushOutcome::Checked {
            newly_converged,
            rearmed,
        })
    }
}
