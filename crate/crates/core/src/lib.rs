//! Reconstruction and interception of a target flying a figure-eight
//! (Bernoulli lemniscate) pattern, from noisy 3D observations.
//!
//! The crate is organized as a pipeline:
//!
//! 1. [`geometry`]: frames, rigid transforms, pinhole back-projection.
//! 2. [`depth`]: histogram-based depth selection from noisy depth patches.
//! 3. [`tracker`]: detection association, region-of-interest management, and
//!    a constant-velocity Kalman filter producing world-frame measurements.
//! 4. [`lemniscate`]: least-assumption fit of a lemniscate (pose via PCA,
//!    scale via robust extreme radii) to the accumulated measurements.
//! 5. [`intercept`]: Hausdorff-distance convergence gating, travel-direction
//!    identification, and computation of the interception pose.
//! 6. [`guidance`]: position-based visual servoing references, yaw control,
//!    search patterns, and the mission mode state machine.
//! 7. [`sim`]: a deterministic closed-loop simulator (target flyer, synthetic
//!    sensor, kinematic interceptor) used by the experiment harness.
//!
//! All computation is `f64`. The crate is `no_std`-compatible (with `alloc`);
//! the default `std` feature only switches dependency features and enables
//! nothing crate-local.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]
#![warn(missing_docs)]

extern crate alloc;

#[cfg(feature = "std")]
extern crate std;

pub mod depth;
pub mod geometry;
pub mod guidance;
pub mod intercept;
pub mod lemniscate;
pub mod sim;
pub mod tracker;

pub use geometry::{CameraIntrinsics, Point3, Pose, RigidTransform};
pub use intercept::{ConvergenceReport, Direction, InterceptPose};
pub use lemniscate::LemniscateEstimate;
pub use sim::{MissionConfig, MissionResult, PipelineConfig, SimConfig};
