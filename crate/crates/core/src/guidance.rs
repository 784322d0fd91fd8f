//! Follower guidance: position servoing, yaw alignment, the mission mode
//! machine, and the search pattern.
//!
//! The position servo is expressed in the follower body frame `F` (x
//! forward along yaw, z up): the measured target position in `F` plus a
//! configured offset vector is the desired displacement, rotated into `G`
//! by the follower's yaw. With yaw control on, the yaw servo faces the
//! target and the lateral (y) target component is dropped from the
//! position servo, since facing motion removes it.

use alloc::vec::Vec;

use core::f64::consts::{FRAC_1_SQRT_2, PI};

#[cfg(not(feature = "std"))]
use num_traits::Float;

use nalgebra::Vector3;

use crate::geometry::{wrap_angle, Point3, Pose};
use crate::intercept::Direction;
use crate::lemniscate::sample_lemniscate;

/// Errors from guidance computations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum GuidanceError {
    /// The target sits at the follower origin; yaw toward it is undefined.
    #[error("target at origin: yaw undefined")]
    TargetAtOrigin,
}

/// Position/yaw servo configuration.
///
/// `x_offset` is the negated standoff distance: `-7.0` holds the follower
/// seven meters behind the target along its own forward axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServoConfig {
    /// Desired target x in `F` after the step, negated (meters).
    pub x_offset: f64,
    /// Desired target y in `F` after the step, negated (meters).
    pub y_offset: f64,
    /// Desired target z in `F` after the step, negated (meters).
    pub z_offset: f64,
    /// Per-axis enable for the global displacement (x, y, z).
    pub active_axes: [bool; 3],
    /// Whether the yaw servo runs and the lateral component is dropped.
    pub yaw_control: bool,
    /// Forward-prediction horizon applied to the tracked target before
    /// servoing, seconds. The servo aims at `position + velocity * lead`,
    /// letting a slower follower cut inside a faster target's curve
    /// instead of tail-chasing it. Zero aims at the current position.
    pub lead_time_s: f64,
}

impl Default for ServoConfig {
    fn default() -> Self {
        Self {
            x_offset: -7.0,
            y_offset: 0.0,
            z_offset: 0.0,
            active_axes: [true, true, true],
            yaw_control: true,
            lead_time_s: 1.0,
        }
    }
}

/// One position-servo step: returns the pose the follower should move
/// toward, given the target position expressed in `F`.
///
/// The commanded displacement in `F` is `target_f + offsets` (with
/// `target_f.y` zeroed when yaw control is on), rotated to `G` by the
/// current yaw; inactive axes are zeroed after rotation. Yaw is carried
/// over unchanged (the yaw servo is separate).
pub fn pbvs_step(follower: &Pose, target_f: Vector3<f64>, cfg: &ServoConfig) -> Pose {
    let mut t = target_f;
    if cfg.yaw_control {
        t.y = 0.0;
    }
    let delta_f = t + Vector3::new(cfg.x_offset, cfg.y_offset, cfg.z_offset);
    let (s, c) = follower.yaw.sin_cos();
    let mut delta_g = Vector3::new(
        c * delta_f.x - s * delta_f.y,
        s * delta_f.x + c * delta_f.y,
        delta_f.z,
    );
    for (axis, &active) in cfg.active_axes.iter().enumerate() {
        if !active {
            delta_g[axis] = 0.0;
        }
    }
    Pose::new(follower.position + delta_g, follower.yaw)
}

/// One yaw-servo step: the yaw that faces the target, given its position
/// in `F`. Errors when the target projects onto the follower origin.
pub fn yaw_step(current_yaw: f64, target_f: Vector3<f64>) -> Result<f64, GuidanceError> {
    if target_f.x == 0.0 && target_f.y == 0.0 {
        return Err(GuidanceError::TargetAtOrigin);
    }
    Ok(wrap_angle(current_yaw + target_f.y.atan2(target_f.x)))
}

/// Mission modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// On the ground, motors idle.
    Idle,
    /// Climbing to operating altitude.
    Takeoff,
    /// Flying the search pattern, no target tracked.
    Search,
    /// Tracking the target and accumulating measurements.
    Follow,
    /// Moving to the interception pose.
    Intercept,
}

impl Mode {
    /// Stable lowercase name, used in mode-transition logs.
    pub fn name(self) -> &'static str {
        match self {
            Mode::Idle => "idle",
            Mode::Takeoff => "takeoff",
            Mode::Search => "search",
            Mode::Follow => "follow",
            Mode::Intercept => "intercept",
        }
    }
}

/// Kinds of events the mode machine reacts to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MissionEventKind {
    /// Operating altitude reached.
    TakeoffComplete,
    /// A confirmed track measurement arrived.
    TargetDetected,
    /// The track was dropped after consecutive misses.
    TargetLost,
    /// The trajectory estimate passed the convergence gate.
    EstimateConverged,
    /// A search waypoint was reached.
    WaypointReached,
}

impl MissionEventKind {
    /// Stable lowercase name, used in mode-transition logs.
    pub fn name(self) -> &'static str {
        match self {
            MissionEventKind::TakeoffComplete => "takeoff-complete",
            MissionEventKind::TargetDetected => "target-detected",
            MissionEventKind::TargetLost => "target-lost",
            MissionEventKind::EstimateConverged => "estimate-converged",
            MissionEventKind::WaypointReached => "waypoint-reached",
        }
    }
}

/// A timestamped mission event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MissionEvent {
    /// Event kind.
    pub kind: MissionEventKind,
    /// Mission time, seconds.
    pub time: f64,
}

/// The mode transition table. Unlisted (mode, event) pairs keep the mode:
///
/// * `Takeoff` + `TakeoffComplete` -> `Search`
/// * `Search` + `TargetDetected` -> `Follow`
/// * `Follow` + `TargetLost` -> `Search`
/// * `Follow` + `EstimateConverged` -> `Intercept`
///
/// `Idle` responds to nothing here; leaving it is the mission runner's
/// imperative start-up act. `Intercept` is terminal.
pub fn step_mode(mode: Mode, event: &MissionEvent) -> Mode {
    use MissionEventKind::*;
    match (mode, event.kind) {
        (Mode::Takeoff, TakeoffComplete) => Mode::Search,
        (Mode::Search, TargetDetected) => Mode::Follow,
        (Mode::Follow, TargetLost) => Mode::Search,
        (Mode::Follow, EstimateConverged) => Mode::Intercept,
        (m, _) => m,
    }
}

/// Axis-aligned arena bounds in `G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arena {
    /// Half-extent along x, meters; the arena spans `[-x, x]`.
    pub half_x: f64,
    /// Half-extent along y, meters.
    pub half_y: f64,
    /// Lowest operating altitude, meters.
    pub z_min: f64,
    /// Highest operating altitude, meters.
    pub z_max: f64,
}

impl Arena {
    /// Mid-band altitude used for searching.
    pub fn search_altitude(&self) -> f64 {
        0.5 * (self.z_min + self.z_max)
    }

    /// Whether a point lies inside the arena volume.
    pub fn contains(&self, p: &Point3) -> bool {
        p.x.abs() <= self.half_x && p.y.abs() <= self.half_y && p.z >= self.z_min && p.z <= self.z_max
    }
}

impl Default for Arena {
    fn default() -> Self {
        Self {
            half_x: 50.0,
            half_y: 30.0,
            z_min: 4.0,
            z_max: 16.0,
        }
    }
}

/// Serpentine (lawnmower) search waypoints covering the arena at the
/// search altitude.
///
/// Legs run along y at x stations spaced at most `spacing` apart,
/// including both x extremes; consecutive legs alternate y direction so
/// the path never retraces. Each waypoint carries the yaw along the
/// upcoming leg.
pub fn search_waypoints(arena: &Arena, spacing: f64) -> Vec<Pose> {
    assert!(spacing > 0.0, "spacing must be positive");
    let width = 2.0 * arena.half_x;
    let n_legs = (width / spacing).ceil() as usize + 1;
    let step = if n_legs > 1 { width / (n_legs - 1) as f64 } else { 0.0 };
    let z = arena.search_altitude();
    let mut out = Vec::with_capacity(2 * n_legs);
    for leg in 0..n_legs {
        let x = -arena.half_x + step * leg as f64;
        let (y0, y1) = if leg % 2 == 0 {
            (-arena.half_y, arena.half_y)
        } else {
            (arena.half_y, -arena.half_y)
        };
        let yaw = (y1 - y0).atan2(0.0);
        out.push(Pose::new(Point3::new(x, y0, z), yaw));
        out.push(Pose::new(Point3::new(x, y1, z), yaw));
    }
    out
}

/// Parameters of the orbit-paced pursuit stage.
///
/// Once the running fit of the orbit is credible, the follower stops
/// chasing the target and instead paces it along an inward-offset copy of
/// the fitted curve (see [`OrbitGuide`]). The offset path is shorter than
/// the orbit, so a follower slower than the target can hold sensing range
/// through entire laps instead of falling behind on the straights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PursuitConfig {
    /// Fit-consistency gate for engaging pacing: the 90th-percentile
    /// distance from the admitted observations to the fitted curve,
    /// as a fraction of the fitted long-axis span, must fall below this.
    /// One-sided by design: it certifies that the fit explains the data
    /// seen so far, without demanding full coverage of the curve, which
    /// is exactly what pacing then accumulates.
    pub engage_consistency: f64,
    /// Minimum lateral pull from the fitted curve toward the lobe
    /// midpoint, meters. [`pacing_offset`] raises it when the target is
    /// fast enough that the follower needs a shorter inside line, and
    /// [`OrbitGuide::aim`] caps the local pull at half the distance to
    /// the midpoint so the aim never crosses to the far side of a small
    /// lobe.
    pub abeam_offset_m: f64,
    /// Pacing falls back to direct chase when no observation was admitted
    /// for this long, seconds; that recovers from a fit that steered the
    /// follower away from the actual orbit.
    pub stale_after_s: f64,
    /// How far outside the fitted crossing the follower stands while
    /// re-acquiring a lost target, meters. The vantage faces the
    /// crossing, which the target transits twice per lap.
    pub reacquire_radius_m: f64,
}

impl Default for PursuitConfig {
    fn default() -> Self {
        Self {
            engage_consistency: 0.05,
            abeam_offset_m: 6.0,
            stale_after_s: 3.0,
            reacquire_radius_m: 10.0,
        }
    }
}

/// Fraction of the follower's top speed budgeted for steady pacing; the
/// remainder absorbs yaw-rate limits and catch-up after re-acquisition.
const PACING_SPEED_MARGIN: f64 = 0.9;

/// Inward offset, meters, that makes the offset path short enough for a
/// follower at `max_speed` to pace a target at `target_speed` around a
/// closed curve of length `perimeter`, with a speed margin in hand. An
/// inward offset of `r` shortens a closed convex circuit by about
/// `2*pi*r`, so the offset solves
/// `target_speed * (perimeter - 2*pi*r) / perimeter <= margin * max_speed`.
/// Never returns less than `floor` (the sensing-driven minimum offset).
pub fn pacing_offset(perimeter: f64, target_speed: f64, max_speed: f64, floor: f64) -> f64 {
    let mut offset = floor;
    if target_speed > 0.0 {
        let needed =
            perimeter / (2.0 * PI) * (1.0 - PACING_SPEED_MARGIN * max_speed / target_speed);
        offset = offset.max(needed);
    }
    offset
}

/// Samples per period in an [`OrbitGuide`]; at typical orbit sizes the
/// sample spacing is well under the aim offsets the guide produces.
const GUIDE_SAMPLES: usize = 512;

/// A pre-sampled closed orbit, in the curve frame, that turns a target
/// position into a pacing aim point.
///
/// [`OrbitGuide::aim`] finds the curve point nearest the target, walks a
/// lead distance along the traversal direction, and pulls the result
/// toward the midpoint of the lobe it lies in. Each lobe fits inside a
/// circle of radius `a / sqrt(2)` around its midpoint, so holding an aim
/// a few meters inside the lobe keeps the whole pass within sensing
/// range, on a path shorter than the target's.
#[derive(Debug, Clone)]
pub struct OrbitGuide {
    a: f64,
    shift_x: f64,
    direction: Direction,
    pts: Vec<Point3>,
    /// Cumulative arc length; `arc[i]` is the length up to `pts[i]` and
    /// the last entry closes the loop back to `pts[0]`.
    arc: Vec<f64>,
}

impl OrbitGuide {
    /// Builds the guide for a fitted curve (focal distance, axial center
    /// shift) and an identified traversal direction.
    pub fn new(a: f64, shift_x: f64, direction: Direction) -> Self {
        let pts = sample_lemniscate(a, shift_x, GUIDE_SAMPLES);
        let mut arc = Vec::with_capacity(GUIDE_SAMPLES + 1);
        arc.push(0.0);
        for i in 0..GUIDE_SAMPLES {
            let next = pts[(i + 1) % GUIDE_SAMPLES];
            arc.push(arc[i] + (next - pts[i]).norm());
        }
        Self {
            a,
            shift_x,
            direction,
            pts,
            arc,
        }
    }

    /// Closed-curve length.
    pub fn perimeter(&self) -> f64 {
        *self.arc.last().expect("arc table is non-empty")
    }

    /// Focal distance of the guided curve, meters.
    pub fn focal_distance(&self) -> f64 {
        self.a
    }

    /// The self-intersection of the curve, in the curve frame. The target
    /// passes through it twice per lap, which makes its neighborhood the
    /// highest-traffic vantage for re-acquisition.
    pub fn crossing_l(&self) -> Point3 {
        Point3::new(self.shift_x, 0.0, 0.0)
    }

    /// Sample index whose segment contains arc position `s` (wrapped).
    fn index_at_arc(&self, s: f64) -> usize {
        let perim = self.perimeter();
        let mut s = s % perim;
        if s < 0.0 {
            s += perim;
        }
        let i = self.arc.partition_point(|&v| v <= s);
        (i - 1) % GUIDE_SAMPLES
    }

    /// The pacing aim for a target at `target_l` (curve frame): the
    /// nearest curve point advanced `lead_arc` meters along the traversal
    /// direction, pulled `offset_m` toward its lobe midpoint. The aim
    /// lies in the curve plane.
    pub fn aim(&self, target_l: Point3, lead_arc: f64, offset_m: f64) -> Point3 {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.pts.iter().enumerate() {
            let d = (p - target_l).norm_squared();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        let sign = match self.direction {
            Direction::Cw => 1.0,
            Direction::Ccw => -1.0,
        };
        let s = self.arc[best] + sign * lead_arc;
        let c = self.pts[self.index_at_arc(s)];

        // Lobe side; right at the crossing, side with the lobe the
        // traversal is about to enter.
        let mut side = c.x - self.shift_x;
        if side.abs() < 0.05 * self.a {
            let ahead = self.pts[self.index_at_arc(s + sign * 0.1 * self.perimeter())];
            side = ahead.x - self.shift_x;
        }
        let side = if side >= 0.0 { 1.0 } else { -1.0 };
        let midpoint = Point3::new(self.shift_x + side * self.a * FRAC_1_SQRT_2, 0.0, 0.0);

        let to_mid = midpoint - c;
        let d = to_mid.norm();
        if d <= f64::EPSILON {
            return c;
        }
        let pull = offset_m.min(0.5 * d);
        c + to_mid * (pull / d)
    }
}
