//! Deterministic, seeded mission simulator: a target flying a
//! figure-eight at constant ground speed, a kinematic interceptor, a
//! synthetic camera/detector/depth sensor, and a mission runner that wires
//! them through the tracking and estimation pipeline and scores the
//! outcome.
//!
//! Everything is a pure function of the configuration and one `u64` seed;
//! identical inputs give bit-identical [`MissionResult`]s.

mod follower;
mod mission;
mod sensor;
mod target;

pub use follower::step_interceptor;
pub use mission::{
    run_mission, run_mission_traced, MissionResult, ModeTransition, TraceRecord,
};
pub use sensor::{false_positive, sense};
pub use target::TargetPath;

use crate::geometry::{CameraIntrinsics, Point3, Pose, RigidTransform};
use crate::guidance::{Arena, PursuitConfig, ServoConfig};
use crate::intercept::{Direction, EstimatorConfig};
use crate::tracker::{DepthParams, KalmanConfig, TrackerConfig};

use core::f64::consts::TAU;

// Required at the minimum supported toolchain, where f64 math is not in
// core; newer toolchains may leave it idle.
#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
use num_traits::Float;

use nalgebra::Vector3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The target's true trajectory: a figure-eight of focal distance `a`
/// placed by `pose` (which may tilt it out of plane), traversed at
/// constant ground `speed` starting from curve parameter `start_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetConfig {
    /// Focal distance, meters.
    pub a: f64,
    /// Curve-local-to-global placement.
    pub pose: RigidTransform,
    /// Constant ground speed, meters/second.
    pub speed: f64,
    /// Curve parameter at `t = 0`, radians.
    pub start_t: f64,
    /// Traversal direction.
    pub direction: Direction,
}

impl Default for TargetConfig {
    fn default() -> Self {
        Self {
            a: 20.0,
            pose: RigidTransform {
                rotation: nalgebra::Matrix3::identity(),
                translation: Vector3::new(0.0, 0.0, 10.0),
            },
            speed: 4.0,
            start_t: 0.0,
            direction: Direction::Cw,
        }
    }
}

impl TargetConfig {
    /// A randomized placement drawn from `seed`: uniform yaw, up to ~8
    /// degrees of out-of-plane tilt, center jitter inside the arena's
    /// middle, altitude in [8, 12] m, random start parameter and
    /// direction.
    pub fn seeded(a: f64, speed: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let yaw = rng.random_range(0.0..TAU);
        let tilt = 8.0f64.to_radians();
        let roll = rng.random_range(-tilt..tilt);
        let pitch = rng.random_range(-tilt..tilt);
        let translation = Vector3::new(
            rng.random_range(-8.0..8.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(8.0..12.0),
        );
        let rotation = *nalgebra::Rotation3::from_euler_angles(roll, pitch, yaw).matrix();
        let pose = RigidTransform::from_parts(rotation, translation)
            .expect("euler rotation is orthonormal");
        let start_t = rng.random_range(0.0..TAU);
        let direction = if rng.random::<f64>() < 0.5 {
            Direction::Cw
        } else {
            Direction::Ccw
        };
        Self {
            a,
            pose,
            speed,
            start_t,
            direction,
        }
    }
}

/// Synthetic detector + stereo-depth sensor model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorConfig {
    /// Pinhole intrinsics.
    pub intrinsics: CameraIntrinsics,
    /// Lower usable depth bound, meters.
    pub range_min: f64,
    /// Upper usable depth bound, meters.
    pub range_max: f64,
    /// Detector frame rate, hertz.
    pub rate_hz: f64,
    /// Per-frame detection probability for an in-frustum target.
    pub detection_probability: f64,
    /// Added to the probability when the target falls inside the active
    /// RoI window (capped at 1).
    pub roi_detection_bonus: f64,
    /// Standard deviation of the bounding-box center, pixels.
    pub pixel_noise_sigma: f64,
    /// Standard deviation of inlier depth samples, meters.
    pub depth_noise_sigma: f64,
    /// Fraction of patch samples drawn uniformly over the range instead.
    pub outlier_fraction: f64,
    /// Per-frame probability of one spurious detection.
    pub false_positive_rate: f64,
    /// Physical diagonal of the target, meters; sets apparent size.
    pub target_diagonal_m: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            intrinsics: CameraIntrinsics {
                fx: 700.0,
                fy: 700.0,
                cx: 640.0,
                cy: 360.0,
                width: 1280,
                height: 720,
            },
            range_min: 2.0,
            range_max: 15.0,
            rate_hz: 7.0,
            detection_probability: 0.9,
            roi_detection_bonus: 0.05,
            pixel_noise_sigma: 2.0,
            depth_noise_sigma: 0.3,
            outlier_fraction: 0.2,
            false_positive_rate: 0.05,
            target_diagonal_m: 1.13,
        }
    }
}

/// Kinematic limits of the interceptor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterceptorConfig {
    /// Translational speed cap, meters/second.
    pub max_speed: f64,
    /// Yaw rate cap, radians/second.
    pub max_yaw_rate: f64,
    /// Control tick rate, hertz.
    pub control_rate_hz: f64,
}

impl Default for InterceptorConfig {
    fn default() -> Self {
        Self {
            max_speed: 4.5,
            max_yaw_rate: 1.5,
            control_rate_hz: 50.0,
        }
    }
}

/// Mission-level timing, start pose, and scoring parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MissionConfig {
    /// Follower pose at `t = 0` (on the ground).
    pub start: Pose,
    /// Fixed climb duration before searching, seconds.
    pub takeoff_duration_s: f64,
    /// Leg spacing of the search sweep, meters.
    pub search_spacing_m: f64,
    /// Distance at which a search waypoint counts as reached, meters.
    pub waypoint_arrival_m: f64,
    /// Hard mission cutoff, seconds. The default fits the full loop
    /// budget of the slowest supported target plus its search phase.
    pub timeout_s: f64,
    /// Position tolerance for interception arrival, meters.
    pub arrival_position_m: f64,
    /// Yaw tolerance for interception arrival, radians.
    pub arrival_yaw_rad: f64,
    /// Convergence must happen within this many target loops to count as
    /// success.
    pub max_loops: f64,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            start: Pose::new(Point3::new(-35.0, -20.0, 0.0), 0.0),
            takeoff_duration_s: 3.0,
            search_spacing_m: 20.0,
            waypoint_arrival_m: 1.0,
            timeout_s: 300.0,
            arrival_position_m: 0.5,
            arrival_yaw_rad: 0.1,
            max_loops: 3.0,
        }
    }
}

/// All perception/estimation/guidance parameters of the follower.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PipelineConfig {
    /// Kalman filter noise model.
    pub kalman: KalmanConfig,
    /// Association, RoI, and track-life parameters.
    pub tracker: TrackerConfig,
    /// Depth histogram parameters.
    pub depth: DepthParams,
    /// Curve estimation and convergence gating.
    pub estimator: EstimatorConfig,
    /// Position/yaw servo offsets.
    pub servo: ServoConfig,
    /// Orbit-paced pursuit stage.
    pub pursuit: PursuitConfig,
}

/// Complete simulation configuration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimConfig {
    /// Arena bounds.
    pub arena: Arena,
    /// Target trajectory.
    pub target: TargetConfig,
    /// Sensor model.
    pub sensor: SensorConfig,
    /// Interceptor kinematics.
    pub interceptor: InterceptorConfig,
    /// Mission timing and scoring.
    pub mission: MissionConfig,
    /// Follower pipeline parameters.
    pub pipeline: PipelineConfig,
}

/// A configuration rejected before the mission starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("invalid configuration: {0}")]
pub struct ConfigError(pub &'static str);

fn probability(v: f64, what: &'static str) -> Result<(), ConfigError> {
    if !(0.0..=1.0).contains(&v) {
        return Err(ConfigError(what));
    }
    Ok(())
}

fn positive(v: f64, what: &'static str) -> Result<(), ConfigError> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(ConfigError(what));
    }
    Ok(())
}

impl SimConfig {
    /// Checks every cross-field invariant; the first violation is
    /// reported.
    pub fn validate(&self) -> Result<(), ConfigError> {
        positive(self.arena.half_x, "arena x extent must be positive")?;
        positive(self.arena.half_y, "arena y extent must be positive")?;
        if !(self.arena.z_min > 0.0 && self.arena.z_max > self.arena.z_min) {
            return Err(ConfigError("arena altitude band must satisfy 0 < z_min < z_max"));
        }

        positive(self.target.a, "target focal distance must be positive")?;
        positive(self.target.speed, "target speed must be positive")?;
        if !self.target.start_t.is_finite() {
            return Err(ConfigError("target start parameter must be finite"));
        }

        let s = &self.sensor;
        let i = &s.intrinsics;
        if !(i.fx > 0.0 && i.fy > 0.0) {
            return Err(ConfigError("focal lengths must be positive"));
        }
        if !(i.cx > 0.0 && i.cx < i.width as f64 && i.cy > 0.0 && i.cy < i.height as f64) {
            return Err(ConfigError("principal point must lie inside the image"));
        }
        if !(s.range_min > 0.0 && s.range_max > s.range_min && s.range_max.is_finite()) {
            return Err(ConfigError("depth range must satisfy 0 < min < max"));
        }
        positive(s.rate_hz, "sensor rate must be positive")?;
        probability(s.detection_probability, "detection probability must be in [0, 1]")?;
        probability(s.outlier_fraction, "outlier fraction must be in [0, 1]")?;
        probability(s.false_positive_rate, "false positive rate must be in [0, 1]")?;
        if !(s.roi_detection_bonus >= 0.0 && s.roi_detection_bonus.is_finite()) {
            return Err(ConfigError("RoI detection bonus must be non-negative"));
        }
        if !(s.pixel_noise_sigma >= 0.0 && s.depth_noise_sigma >= 0.0) {
            return Err(ConfigError("noise deviations must be non-negative"));
        }
        positive(s.target_diagonal_m, "target diagonal must be positive")?;

        positive(self.interceptor.max_speed, "interceptor speed cap must be positive")?;
        positive(self.interceptor.max_yaw_rate, "interceptor yaw-rate cap must be positive")?;
        positive(self.interceptor.control_rate_hz, "control rate must be positive")?;

        let m = &self.mission;
        if !(m.takeoff_duration_s >= 0.0 && m.takeoff_duration_s.is_finite()) {
            return Err(ConfigError("takeoff duration must be non-negative"));
        }
        positive(m.search_spacing_m, "search spacing must be positive")?;
        positive(m.waypoint_arrival_m, "waypoint arrival tolerance must be positive")?;
        positive(m.timeout_s, "mission timeout must be positive")?;
        positive(m.arrival_position_m, "arrival position tolerance must be positive")?;
        positive(m.arrival_yaw_rad, "arrival yaw tolerance must be positive")?;
        positive(m.max_loops, "loop budget must be positive")?;

        let p = &self.pipeline;
        if !p.servo.active_axes.iter().any(|&a| a) {
            return Err(ConfigError("at least one servo axis must be active"));
        }
        for off in [p.servo.x_offset, p.servo.y_offset, p.servo.z_offset] {
            if !off.is_finite() {
                return Err(ConfigError("servo offsets must be finite"));
            }
        }
        if !p.servo.lead_time_s.is_finite() || p.servo.lead_time_s < 0.0 {
            return Err(ConfigError("servo lead time must be finite and non-negative"));
        }
        positive(p.kalman.sigma_meas, "measurement deviation must be positive")?;
        positive(p.kalman.sigma_acc, "acceleration deviation must be positive")?;
        positive(p.kalman.initial_pos_var, "initial position variance must be positive")?;
        positive(p.kalman.initial_vel_var, "initial velocity variance must be positive")?;
        if p.tracker.n_miss == 0 || p.tracker.n_consec == 0 {
            return Err(ConfigError("track-life frame counts must be at least 1"));
        }
        if p.tracker.roi_factor.is_nan() || p.tracker.roi_factor < 1.0 {
            return Err(ConfigError("RoI factor must be at least 1"));
        }
        probability(p.tracker.min_association_iou, "association IoU floor must be in [0, 1]")?;
        positive(p.tracker.max_innovation_m, "innovation gate must be positive")?;
        if p.depth.bin_count < 3 {
            return Err(ConfigError("histogram needs at least 3 bins"));
        }
        probability(p.depth.bbox_area_threshold, "bbox area threshold must be in [0, 1]")?;
        if p.estimator.min_points < 4 {
            return Err(ConfigError("estimator needs at least 4 points"));
        }
        if p.estimator.curve_samples < 4 {
            return Err(ConfigError("estimator needs at least 4 curve samples"));
        }
        if p.estimator.commit_checks == 0 {
            return Err(ConfigError("commit debounce must be at least 1 check"));
        }
        positive(p.estimator.threshold, "convergence threshold must be positive")?;
        if p.estimator.rearm_factor.is_nan() || p.estimator.rearm_factor < 1.0 {
            return Err(ConfigError("re-arm factor must be at least 1"));
        }
        if p.estimator.min_time_span.is_nan() || p.estimator.min_time_span < 0.0 {
            return Err(ConfigError("estimator time span must be non-negative"));
        }
        positive(
            p.pursuit.engage_consistency,
            "pursuit engage consistency must be positive",
        )?;
        positive(p.pursuit.abeam_offset_m, "pursuit abeam offset must be positive")?;
        positive(p.pursuit.stale_after_s, "pursuit staleness window must be positive")?;
        positive(p.pursuit.reacquire_radius_m, "re-acquisition radius must be positive")?;
        Ok(())
    }
}
