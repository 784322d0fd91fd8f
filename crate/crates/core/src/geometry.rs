//! Frames, rigid transforms, and pinhole camera geometry.
//!
//! Frames used throughout the crate:
//!
//! - `G`: fixed world frame, right-handed, z up.
//! - `F`: interceptor body frame, x forward, y left, z up.
//! - `C`: camera frame, x right, y down, z forward along the optical axis.
//! - `L`: curve frame; the fitted figure-eight lies in its x-y plane,
//!   centered at the origin, lobes along x.
//!
//! Yaw is the rotation about +z, zero along +x, positive counterclockwise
//! when viewed from +z, and is kept normalized to `(-PI, PI]`.

use core::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
#[cfg(not(feature = "std"))]
use num_traits::Float;

/// A 3D point in meters. Which frame it lives in is tracked by convention
/// (`p_g`, `p_c`, ... in signatures), not by the type.
pub type Point3 = nalgebra::Point3<f64>;

/// Errors from geometric constructors and projections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum GeometryError {
    /// An input coordinate was NaN or infinite.
    #[error("non-finite input")]
    NonFinite,
    /// Back-projection requires a strictly positive depth.
    #[error("non-positive depth")]
    NonPositiveDepth,
    /// The supplied rotation matrix is singular or left-handed.
    #[error("matrix is not a proper rotation")]
    InvalidRotation,
}

/// Normalizes an angle to `(-PI, PI]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut r = angle % two_pi;
    if r <= -PI {
        r += two_pi;
    } else if r > PI {
        r -= two_pi;
    }
    r
}

/// Pinhole camera intrinsics. Focal lengths and principal point are in
/// pixels; the image is `width` x `height` pixels with (0, 0) at the top
/// left corner and v growing downward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    /// Horizontal focal length, pixels.
    pub fx: f64,
    /// Vertical focal length, pixels.
    pub fy: f64,
    /// Principal point u-coordinate, pixels.
    pub cx: f64,
    /// Principal point v-coordinate, pixels.
    pub cy: f64,
    /// Image width, pixels.
    pub width: u32,
    /// Image height, pixels.
    pub height: u32,
}

impl CameraIntrinsics {
    /// Lifts a pixel `(u, v)` with measured depth `d` (meters along the
    /// optical axis) to a 3D point in the camera frame:
    /// `((u - cx) / fx * d, (v - cy) / fy * d, d)`.
    ///
    /// Errors on non-finite input or `d <= 0`.
    pub fn backproject(&self, u: f64, v: f64, d: f64) -> Result<Point3, GeometryError> {
        if !(u.is_finite() && v.is_finite() && d.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if d <= 0.0 {
            return Err(GeometryError::NonPositiveDepth);
        }
        Ok(Point3::new(
            (u - self.cx) / self.fx * d,
            (v - self.cy) / self.fy * d,
            d,
        ))
    }

    /// Projects a camera-frame point to pixel coordinates. Returns `None`
    /// for points at or behind the image plane (`z <= 0`) or non-finite
    /// input. The result may fall outside the image bounds; see
    /// [`CameraIntrinsics::contains`].
    pub fn project(&self, p_c: Point3) -> Option<(f64, f64)> {
        if !(p_c.x.is_finite() && p_c.y.is_finite() && p_c.z.is_finite()) || p_c.z <= 0.0 {
            return None;
        }
        Some((
            self.fx * p_c.x / p_c.z + self.cx,
            self.fy * p_c.y / p_c.z + self.cy,
        ))
    }

    /// Whether a pixel coordinate lies inside the image.
    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64
    }
}

/// A proper rigid transform `p -> R p + t`. `T_A_B` denotes the transform
/// taking coordinates expressed in frame `B` to frame `A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    /// Rotation part, an element of SO(3).
    pub rotation: Matrix3<f64>,
    /// Translation part, meters.
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    /// The identity transform.
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a transform from a near-rotation matrix and a translation.
    ///
    /// The rotation is re-orthonormalized by Gram-Schmidt so that small
    /// numerical drift in the input cannot accumulate through composition.
    /// Errors if the input is non-finite, singular, or left-handed.
    pub fn from_parts(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        if !(rotation.iter().all(|x| x.is_finite()) && translation.iter().all(|x| x.is_finite())) {
            return Err(GeometryError::NonFinite);
        }
        let r = orthonormalize(rotation)?;
        Ok(Self {
            rotation: r,
            translation,
        })
    }

    /// A transform rotating by `yaw` about +z and translating by `t`.
    pub fn from_yaw_translation(yaw: f64, t: Vector3<f64>) -> Self {
        let (s, c) = yaw.sin_cos();
        let rotation = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
        Self {
            rotation,
            translation: t,
        }
    }

    /// The canonical forward-looking camera mount `T_F_C`: camera x (right)
    /// maps to body -y, camera y (down) to body -z, and the optical axis
    /// (camera z) to body +x.
    pub fn forward_camera_mount() -> Self {
        Self {
            rotation: Matrix3::new(0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0),
            translation: Vector3::zeros(),
        }
    }

    /// Applies the transform to a point.
    pub fn apply(&self, p: Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    /// Rotates a direction vector (ignores the translation).
    pub fn rotate(&self, v: Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// The inverse transform.
    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Composition: `T_A_B.compose(&T_B_C)` yields `T_A_C`, i.e. `other` is
    /// applied first.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }
}

/// Gram-Schmidt orthonormalization preserving handedness. Errors if the
/// columns are linearly dependent or the result is left-handed.
fn orthonormalize(m: Matrix3<f64>) -> Result<Matrix3<f64>, GeometryError> {
    let c0 = m.column(0).into_owned();
    let n0 = c0.norm();
    if n0 < 1e-12 {
        return Err(GeometryError::InvalidRotation);
    }
    let e0 = c0 / n0;

    let c1 = m.column(1).into_owned();
    let c1 = c1 - e0 * e0.dot(&c1);
    let n1 = c1.norm();
    if n1 < 1e-12 {
        return Err(GeometryError::InvalidRotation);
    }
    let e1 = c1 / n1;

    let c2 = m.column(2).into_owned();
    let c2 = c2 - e0 * e0.dot(&c2) - e1 * e1.dot(&c2);
    let n2 = c2.norm();
    if n2 < 1e-12 {
        return Err(GeometryError::InvalidRotation);
    }
    let e2 = c2 / n2;

    let r = Matrix3::from_columns(&[e0, e1, e2]);
    if r.determinant() <= 0.0 {
        return Err(GeometryError::InvalidRotation);
    }
    Ok(r)
}

/// Chains a camera-frame point to the world frame:
/// `p_g = T_G_F * T_F_C * p_c`.
pub fn camera_to_global(p_c: Point3, t_f_c: &RigidTransform, t_g_f: &RigidTransform) -> Point3 {
    t_g_f.apply(t_f_c.apply(p_c))
}

/// A position plus heading. Roll and pitch are not modeled; the interceptor
/// and all guidance references are yaw-only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    /// Position in the world frame, meters.
    pub position: Point3,
    /// Heading about +z, normalized to `(-PI, PI]`.
    pub yaw: f64,
}

impl Pose {
    /// Creates a pose, normalizing the yaw.
    pub fn new(position: Point3, yaw: f64) -> Self {
        Self {
            position,
            yaw: wrap_angle(yaw),
        }
    }

    /// The body-to-world transform `T_G_F` for this pose.
    pub fn to_transform(&self) -> RigidTransform {
        RigidTransform::from_yaw_translation(self.yaw, self.position.coords)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn test_intrinsics() -> CameraIntrinsics {
        CameraIntrinsics {
            fx: 500.0,
            fy: 500.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
        }
    }

    #[test]
    fn backproject_worked_example() {
        let cam = test_intrinsics();
        let p = cam.backproject(370.0, 290.0, 10.0).unwrap();
        assert_abs_diff_eq!(p.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.z, 10.0, epsilon = 1e-12);
    }

    #[test]
    fn backproject_rejects_bad_input() {
        let cam = test_intrinsics();
        assert_eq!(cam.backproject(370.0, 290.0, 0.0), Err(GeometryError::NonPositiveDepth));
        assert_eq!(cam.backproject(370.0, 290.0, -3.0), Err(GeometryError::NonPositiveDepth));
        assert_eq!(cam.backproject(f64::NAN, 290.0, 1.0), Err(GeometryError::NonFinite));
        assert_eq!(cam.backproject(370.0, f64::INFINITY, 1.0), Err(GeometryError::NonFinite));
    }

    #[test]
    fn project_backproject_round_trip() {
        let cam = test_intrinsics();
        let p = Point3::new(-1.3, 0.7, 9.2);
        let (u, v) = cam.project(p).unwrap();
        let q = cam.backproject(u, v, p.z).unwrap();
        assert_relative_eq!(p, q, epsilon = 1e-12);
    }

    #[test]
    fn project_rejects_points_behind_camera() {
        let cam = test_intrinsics();
        assert_eq!(cam.project(Point3::new(0.0, 0.0, -1.0)), None);
        assert_eq!(cam.project(Point3::new(0.0, 0.0, 0.0)), None);
    }

    #[test]
    fn wrap_angle_table() {
        assert_eq!(wrap_angle(0.0), 0.0);
        assert_abs_diff_eq!(wrap_angle(PI), PI);
        assert_abs_diff_eq!(wrap_angle(-PI), PI);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI), PI);
        assert_abs_diff_eq!(wrap_angle(-3.0 * PI), PI);
        assert_abs_diff_eq!(wrap_angle(2.0 * PI), 0.0);
        assert_abs_diff_eq!(wrap_angle(PI + 0.1), -PI + 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(-PI - 0.1), PI - 0.1, epsilon = 1e-12);
    }

    #[test]
    fn apply_rotates_then_translates() {
        let t = RigidTransform::from_yaw_translation(PI / 2.0, Vector3::new(1.0, 0.0, 0.0));
        let p = t.apply(Point3::new(1.0, 0.0, 0.0));
        assert_abs_diff_eq!(p.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn inverse_round_trip() {
        let t = RigidTransform::from_yaw_translation(0.83, Vector3::new(4.0, -2.5, 7.1));
        let p = Point3::new(3.3, 1.2, -0.4);
        let q = t.inverse().apply(t.apply(p));
        assert_relative_eq!(p, q, epsilon = 1e-12);
    }

    #[test]
    fn compose_chains_right_to_left() {
        // T_A_B followed by T_B_C equals applying T_B_C to the point first.
        let t_a_b = RigidTransform::from_yaw_translation(0.4, Vector3::new(1.0, 2.0, 3.0));
        let t_b_c = RigidTransform::from_yaw_translation(-1.2, Vector3::new(-0.5, 0.0, 1.0));
        let p = Point3::new(0.3, -0.7, 2.0);
        let direct = t_a_b.apply(t_b_c.apply(p));
        let chained = t_a_b.compose(&t_b_c).apply(p);
        assert_relative_eq!(direct, chained, epsilon = 1e-12);
    }

    #[test]
    fn camera_chain_worked_example() {
        // A point 4 m ahead on the boresight of a forward-mounted camera on
        // a body at (10, 5, 8) yawed 90 degrees lands at (10, 9, 8).
        let t_f_c = RigidTransform::forward_camera_mount();
        let t_g_f = RigidTransform::from_yaw_translation(PI / 2.0, Vector3::new(10.0, 5.0, 8.0));
        let p_g = camera_to_global(Point3::new(0.0, 0.0, 4.0), &t_f_c, &t_g_f);
        assert_abs_diff_eq!(p_g.x, 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p_g.y, 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p_g.z, 8.0, epsilon = 1e-12);
    }

    #[test]
    fn camera_mount_axes() {
        let t = RigidTransform::forward_camera_mount();
        // Optical axis is body +x; image right is body -y; image down is body -z.
        assert_relative_eq!(t.rotate(Vector3::z()), Vector3::x(), epsilon = 1e-15);
        assert_relative_eq!(t.rotate(Vector3::x()), -Vector3::y(), epsilon = 1e-15);
        assert_relative_eq!(t.rotate(Vector3::y()), -Vector3::z(), epsilon = 1e-15);
        assert_abs_diff_eq!(t.rotation.determinant(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn from_parts_reorthonormalizes() {
        // Perturb a valid rotation; construction must restore orthonormality.
        let mut m = RigidTransform::from_yaw_translation(0.7, Vector3::zeros()).rotation;
        m[(0, 0)] += 1e-4;
        m[(1, 2)] -= 2e-4;
        let t = RigidTransform::from_parts(m, Vector3::zeros()).unwrap();
        let r = t.rotation;
        let should_be_identity = r.transpose() * r;
        assert_relative_eq!(should_be_identity, Matrix3::identity(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.determinant(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn from_parts_rejects_degenerate_input() {
        let singular = Matrix3::new(1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert_eq!(
            RigidTransform::from_parts(singular, Vector3::zeros()),
            Err(GeometryError::InvalidRotation)
        );
        let left_handed = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert_eq!(
            RigidTransform::from_parts(left_handed, Vector3::zeros()),
            Err(GeometryError::InvalidRotation)
        );
        let nan = Matrix3::from_element(f64::NAN);
        assert_eq!(
            RigidTransform::from_parts(nan, Vector3::zeros()),
            Err(GeometryError::NonFinite)
        );
    }

    #[test]
    fn pose_normalizes_yaw() {
        let p = Pose::new(Point3::origin(), 3.0 * PI);
        assert_abs_diff_eq!(p.yaw, PI);
        let t = p.to_transform();
        let q = t.apply(Point3::new(1.0, 0.0, 0.0));
        assert_abs_diff_eq!(q.x, -1.0, epsilon = 1e-12);
    }
}
