//! The target's true path: constant-ground-speed traversal of the
//! figure-eight via an arc-length table.
//!
//! The curve parameter does not advance linearly with distance, so the
//! path tabulates cumulative chord length over 10^4 parameter samples per
//! period and inverts it by binary search with linear interpolation. The
//! returned point is always an exact curve evaluation at the interpolated
//! parameter, so the path satisfies the curve's implicit equation to
//! machine precision at all times.

use alloc::vec::Vec;

use core::f64::consts::TAU;

// Required at the minimum supported toolchain, where f64 math is not in
// core; newer toolchains may leave it idle.
#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
use num_traits::Float;

use crate::geometry::{Point3, RigidTransform};
use crate::intercept::Direction;
use crate::lemniscate::lemniscate_point;

use super::TargetConfig;

/// Parameter samples per period in the arc-length table.
const TABLE_SIZE: usize = 10_000;

/// Precomputed arc-length parameterization of one target trajectory.
#[derive(Debug, Clone)]
pub struct TargetPath {
    cfg: TargetConfig,
    inverse_pose: RigidTransform,
    /// Curve points in `L` at `params[i] = TAU * i / TABLE_SIZE`,
    /// `i = 0..=TABLE_SIZE`.
    points_l: Vec<Point3>,
    /// Cumulative chord length up to each table point; last entry is the
    /// perimeter.
    arc: Vec<f64>,
    /// Arc position of the configured start parameter.
    start_s: f64,
}

impl TargetPath {
    /// Builds the table for one configuration.
    pub fn new(cfg: &TargetConfig) -> Self {
        let n = TABLE_SIZE;
        let points_l: Vec<Point3> = (0..=n)
            .map(|i| lemniscate_point(cfg.a, 0.0, TAU * i as f64 / n as f64))
            .collect();
        let mut arc = Vec::with_capacity(n + 1);
        arc.push(0.0);
        for i in 0..n {
            let prev = arc[i];
            arc.push(prev + (points_l[i + 1] - points_l[i]).norm());
        }
        let mut path = Self {
            cfg: *cfg,
            inverse_pose: cfg.pose.inverse(),
            points_l,
            arc,
            start_s: 0.0,
        };
        let mut start = cfg.start_t % TAU;
        if start < 0.0 {
            start += TAU;
        }
        path.start_s = path.arc_of_param(start);
        path
    }

    /// The configuration the table was built for.
    pub fn config(&self) -> &TargetConfig {
        &self.cfg
    }

    /// Total curve length per period.
    pub fn perimeter(&self) -> f64 {
        *self.arc.last().expect("table is non-empty")
    }

    /// Seconds per full traversal.
    pub fn period(&self) -> f64 {
        self.perimeter() / self.cfg.speed
    }

    /// Arc position of a parameter in `[0, TAU]`, by table interpolation.
    fn arc_of_param(&self, t: f64) -> f64 {
        let x = t / TAU * TABLE_SIZE as f64;
        let i = (x as usize).min(TABLE_SIZE - 1);
        let frac = x - i as f64;
        self.arc[i] + (self.arc[i + 1] - self.arc[i]) * frac
    }

    /// Parameter whose arc position is `s` in `[0, perimeter]`.
    fn param_of_arc(&self, s: f64) -> f64 {
        // First index whose cumulative length exceeds s; the containing
        // segment is [i-1, i].
        let i = self.arc.partition_point(|&v| v <= s).min(TABLE_SIZE);
        let i0 = i.saturating_sub(1);
        let seg = self.arc[i] - self.arc[i0];
        let frac = if seg > 0.0 { (s - self.arc[i0]) / seg } else { 0.0 };
        TAU * (i0 as f64 + frac) / TABLE_SIZE as f64
    }

    /// Curve parameter occupied at mission time `t` (seconds).
    pub fn param_at(&self, t: f64) -> f64 {
        let travel = self.cfg.speed * t;
        let s = match self.cfg.direction {
            Direction::Cw => self.start_s + travel,
            Direction::Ccw => self.start_s - travel,
        };
        let perim = self.perimeter();
        let mut s = s % perim;
        if s < 0.0 {
            s += perim;
        }
        self.param_of_arc(s)
    }

    /// Target position in `G` at mission time `t` (seconds).
    pub fn position_at(&self, t: f64) -> Point3 {
        let param = self.param_at(t);
        self.cfg.pose.apply(lemniscate_point(self.cfg.a, 0.0, param))
    }

    /// Euclidean distance from a world point to the nearest point of the
    /// path: coarse scan over the table, then a ternary-search refinement
    /// on the parameter.
    pub fn nearest_distance(&self, p_g: &Point3) -> f64 {
        let p_l = self.inverse_pose.apply(*p_g);
        let mut best_i = 0;
        let mut best_d = f64::INFINITY;
        for (i, q) in self.points_l.iter().enumerate() {
            let d = (p_l - q).norm_squared();
            if d < best_d {
                best_d = d;
                best_i = i;
            }
        }
        // The true minimum lies within two table steps of the best sample;
        // the curve evaluation is periodic, so the window needs no wrap.
        let step = TAU / TABLE_SIZE as f64;
        let mut lo = TAU * best_i as f64 / TABLE_SIZE as f64 - 2.0 * step;
        let mut hi = lo + 4.0 * step;
        let dist = |t: f64| (p_l - lemniscate_point(self.cfg.a, 0.0, t)).norm();
        for _ in 0..80 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if dist(m1) <= dist(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        dist(0.5 * (lo + hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lemniscate::implicit_residual;
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector3;

    fn tilted_config(a: f64, speed: f64, direction: Direction) -> TargetConfig {
        let rotation = *nalgebra::Rotation3::from_euler_angles(0.1, -0.05, 0.8).matrix();
        TargetConfig {
            a,
            pose: RigidTransform::from_parts(rotation, Vector3::new(3.0, -4.0, 10.0)).unwrap(),
            speed,
            start_t: 1.3,
            direction,
        }
    }

    #[test]
    fn starts_at_configured_parameter() {
        let cfg = tilted_config(20.0, 4.0, Direction::Cw);
        let path = TargetPath::new(&cfg);
        let expected = cfg.pose.apply(lemniscate_point(cfg.a, 0.0, cfg.start_t));
        assert!((path.position_at(0.0) - expected).norm() < 1e-9);
    }

    #[test]
    fn returns_to_start_after_one_period() {
        for direction in [Direction::Cw, Direction::Ccw] {
            let cfg = tilted_config(20.0, 4.0, direction);
            let path = TargetPath::new(&cfg);
            let start = path.position_at(0.0);
            let after = path.position_at(path.period());
            assert!(
                (after - start).norm() < 1e-6,
                "period closure error {}",
                (after - start).norm()
            );
        }
    }

    #[test]
    fn perimeter_matches_known_constant() {
        // The figure-eight's length is ~7.4162987 a, i.e. ~5.2441151 times
        // the tip radius a*sqrt(2).
        let cfg = tilted_config(20.0, 4.0, Direction::Cw);
        let path = TargetPath::new(&cfg);
        assert_abs_diff_eq!(path.perimeter() / cfg.a, 7.416_298_7, epsilon = 1e-4);
    }

    #[test]
    fn ground_speed_is_constant() {
        let cfg = tilted_config(20.0, 4.0, Direction::Cw);
        let path = TargetPath::new(&cfg);
        let dt = 1e-3;
        for k in 0..2000 {
            let t = k as f64 * 0.017;
            let v = (path.position_at(t + dt) - path.position_at(t)).norm() / dt;
            assert!(
                (v - cfg.speed).abs() < 0.01 * cfg.speed,
                "speed {v} at t={t} deviates beyond 1%"
            );
        }
    }

    #[test]
    fn path_satisfies_implicit_equation() {
        let cfg = tilted_config(15.0, 3.0, Direction::Ccw);
        let path = TargetPath::new(&cfg);
        let inv = cfg.pose.inverse();
        for k in 0..500 {
            let t = k as f64 * 0.173;
            let p_l = inv.apply(path.position_at(t));
            let res = implicit_residual(cfg.a, 0.0, p_l);
            assert!(res.abs() < 1e-9 * cfg.a.powi(4), "residual {res} at t={t}");
            assert!(p_l.z.abs() < 1e-9);
        }
    }

    #[test]
    fn reverse_direction_mirrors_time() {
        let cw = TargetPath::new(&tilted_config(10.0, 2.0, Direction::Cw));
        let ccw = TargetPath::new(&tilted_config(10.0, 2.0, Direction::Ccw));
        let period = cw.period();
        for k in 1..10 {
            let t = k as f64 * period / 10.0;
            let a = cw.position_at(t);
            let b = ccw.position_at(period - t);
            assert!((a - b).norm() < 1e-6);
        }
    }

    #[test]
    fn nearest_distance_zero_on_path_and_exact_for_offsets() {
        let cfg = tilted_config(10.0, 2.0, Direction::Cw);
        let path = TargetPath::new(&cfg);
        for k in 0..25 {
            let p = path.position_at(k as f64 * 1.7);
            assert!(path.nearest_distance(&p) < 1e-9);
        }
        // Offset outward from the +x tip along the axis: the tip is the
        // closest point.
        let tip_l = lemniscate_point(cfg.a, 0.0, 0.0);
        let off_l = Point3::new(tip_l.x + 0.5, 0.0, 0.0);
        let off_g = cfg.pose.apply(off_l);
        assert_abs_diff_eq!(path.nearest_distance(&off_g), 0.5, epsilon = 1e-6);
        // Out-of-plane offsets add in quadrature.
        let above_g = cfg.pose.apply(Point3::new(tip_l.x, 0.0, 2.0));
        assert_abs_diff_eq!(path.nearest_distance(&above_g), 2.0, epsilon = 1e-6);
    }
}
