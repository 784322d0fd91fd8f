//! Kinematic interceptor: rate-limited motion toward a pose reference.

// Required at the minimum supported toolchain, where f64 math is not in
// core; newer toolchains may leave it idle.
#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
use num_traits::Float;

use crate::geometry::{wrap_angle, Pose};

use super::InterceptorConfig;

/// Moves the follower one tick toward `reference`: straight-line
/// translation capped at `max_speed`, shortest-path yaw capped at
/// `max_yaw_rate`. Lands exactly on the reference when it is within one
/// step.
pub fn step_interceptor(state: &Pose, reference: &Pose, cfg: &InterceptorConfig, dt: f64) -> Pose {
    debug_assert!(dt > 0.0);
    let delta = reference.position - state.position;
    let dist = delta.norm();
    let max_step = cfg.max_speed * dt;
    let position = if dist <= max_step {
        reference.position
    } else {
        state.position + delta * (max_step / dist)
    };

    let yaw_err = wrap_angle(reference.yaw - state.yaw);
    let max_turn = cfg.max_yaw_rate * dt;
    let yaw = if yaw_err.abs() <= max_turn {
        reference.yaw
    } else {
        state.yaw + max_turn.copysign(yaw_err)
    };
    Pose::new(position, yaw)
}
