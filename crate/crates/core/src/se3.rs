//! Rigid-body kinematics on SE(3).
//!
//! A [`Pose`] maps camera-frame points into the world frame
//! (`p_world = R * p_cam + t`). A [`Twist`] is a camera velocity expressed in
//! the current camera frame, so a servo step integrates as
//! `pose <- pose * exp(twist * dt)`.
//!
//! Rotations are stored as matrices; axis-angle only appears at the
//! exponential/logarithm boundary.

use std::f64::consts::PI;
use std::ops::{Mul, Neg};

use nalgebra::{Matrix3, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this rotation angle (rad) the exponential and logarithm switch to
/// their Taylor expansions.
pub const SMALL_ANGLE: f64 = 1e-8;
/// Below this angle the cubic Jacobian coefficients use a truncated series.
const SERIES_ANGLE: f64 = 1e-2;

/// Within this distance of pi the logarithm recovers the rotation axis from
/// the symmetric part of the rotation matrix.
const NEAR_PI: f64 = 1e-6;

/// Orthonormality and determinant tolerance for a valid rotation.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Skew-symmetric (hat) matrix of a 3-vector.
pub fn hat(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Inverse of [`hat`] applied to the antisymmetric part of `m`.
fn vee_antisym(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]) * 0.5
}

/// Camera velocity: linear (m/s) and angular (rad/s) parts in the camera frame.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist {
    pub linear: Vector3<f64>,
    pub angular: Vector3<f64>,
}

impl Twist {
    pub fn new(linear: Vector3<f64>, angular: Vector3<f64>) -> Self {
        Self { linear, angular }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// Ordered as `(vx, vy, vz, wx, wy, wz)`.
    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self {
            linear: Vector3::new(v[0], v[1], v[2]),
            angular: Vector3::new(v[3], v[4], v[5]),
        }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.linear.x,
            self.linear.y,
            self.linear.z,
            self.angular.x,
            self.angular.y,
            self.angular.z,
        )
    }

    pub fn is_finite(&self) -> bool {
        self.linear.iter().chain(self.angular.iter()).all(|x| x.is_finite())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            linear: self.linear * s,
            angular: self.angular * s,
        }
    }
}

impl Neg for Twist {
    type Output = Twist;
    fn neg(self) -> Twist {
        self.scaled(-1.0)
    }
}

/// Rigid camera pose in the world frame (world-from-camera).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a pose, checking that `rotation` is a proper rotation.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        check_rotation(&rotation)?;
        if !translation.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("pose translation is not finite"));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Rotation of `angle` radians about `axis` (normalized internally), with
    /// the given translation.
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64, translation: Vector3<f64>) -> Self {
        let n = axis.norm();
        let rotation = if n == 0.0 {
            Matrix3::identity()
        } else {
            so3_exp(&(axis * (angle / n)))
        };
        Self {
            rotation,
            translation,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Maps a point from this pose's local frame into the parent frame.
    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Maps a parent-frame point into this pose's local frame.
    pub fn inverse_transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.tr_mul(&(p - self.translation))
    }

    /// Unit quaternion of the rotation, `w >= 0`.
    pub fn quaternion(&self) -> UnitQuaternion<f64> {
        let q = UnitQuaternion::from_matrix(&self.rotation);
        if q.w < 0.0 {
            UnitQuaternion::new_unchecked(-q.into_inner())
        } else {
            q
        }
    }

    /// 3x4 row-major `[R | t]`.
    pub fn to_rows(&self) -> [[f64; 4]; 3] {
        let mut rows = [[0.0; 4]; 3];
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().take(3).enumerate() {
                *x = self.rotation[(i, j)];
            }
            row[3] = self.translation[i];
        }
        rows
    }

    pub fn from_rows(rows: &[[f64; 4]; 3]) -> Result<Self> {
        let rotation = Matrix3::from_fn(|i, j| rows[i][j]);
        let translation = Vector3::new(rows[0][3], rows[1][3], rows[2][3]);
        Self::new(rotation, translation)
    }

    /// Integrates a camera-frame twist: `self * exp(xi * dt)`.
    pub fn integrate(&self, xi: &Twist, dt: f64) -> Result<Self> {
        Ok(*self * exp_twist(xi, dt)?)
    }
}

impl Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        Pose {
            rotation: self.rotation * rhs.rotation,
            translation: self.rotation * rhs.translation + self.translation,
        }
    }
}

fn check_rotation(r: &Matrix3<f64>) -> Result<()> {
    if !r.iter().all(|x| x.is_finite()) {
        return Err(Error::invalid("rotation has non-finite entries"));
    }
    let ortho = (r.tr_mul(r) - Matrix3::identity()).norm();
    if ortho > ROTATION_TOLERANCE {
        return Err(Error::invalid(format!(
            "rotation is not orthonormal (|R^T R - I| = {ortho:e})"
        )));
    }
    let det = r.determinant();
    if (det - 1.0).abs() > ROTATION_TOLERANCE {
        return Err(Error::invalid(format!("rotation determinant is {det}")));
    }
    Ok(())
}

/// Rodrigues' formula.
/// `(1 - cos t) / t^2` without cancellation.
fn one_minus_cos_over_sq(theta: f64) -> f64 {
    let s = (0.5 * theta).sin() / theta;
    2.0 * s * s
}

fn so3_exp(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta = w.norm();
    let k = hat(w);
    let (a, b) = if theta < SMALL_ANGLE {
        (1.0 - theta * theta / 6.0, 0.5 - theta * theta / 24.0)
    } else {
        (theta.sin() / theta, one_minus_cos_over_sq(theta))
    };
    Matrix3::identity() + k * a + k * k * b
}

/// Returns `(axis * angle, angle)` with the angle in `[0, pi]`.
fn so3_log(r: &Matrix3<f64>) -> (Vector3<f64>, f64) {
    let v = vee_antisym(r);
    let sin_theta = v.norm();
    let cos_theta = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = sin_theta.atan2(cos_theta);

    if theta < SMALL_ANGLE {
        // R ~ I + hat(w): first-order inverse, exact to O(theta^3).
        return (v, theta);
    }
    if PI - theta < NEAR_PI {
        // sin(theta) carries no usable axis information here. Use
        // (R + R^T)/2 - cos(theta) I = (1 - cos(theta)) a a^T.
        let sym = (r + r.transpose()) * 0.5 - Matrix3::identity() * cos_theta;
        let denom = 1.0 - cos_theta;
        let diag = Vector3::new(sym[(0, 0)], sym[(1, 1)], sym[(2, 2)]);
        let k = diag.imax();
        let ak = (diag[k] / denom).max(0.0).sqrt();
        let mut axis = Vector3::zeros();
        for i in 0..3 {
            axis[i] = if i == k { ak } else { sym[(i, k)] / (denom * ak) };
        }
        axis.normalize_mut();
        // Resolve the sign from the antisymmetric part when it carries one.
        if axis.dot(&v) < 0.0 {
            axis = -axis;
        }
        return (axis * theta, theta);
    }
    (v * (theta / sin_theta), theta)
}

/// Left Jacobian V(w) of SO(3), mapping twist translation to pose translation.
fn so3_left_jacobian(w: &Vector3<f64>, theta: f64) -> Matrix3<f64> {
    let k = hat(w);
    let t2 = theta * theta;
    let b = if theta < SMALL_ANGLE {
        0.5 - t2 / 24.0
    } else {
        one_minus_cos_over_sq(theta)
    };
    let c = if theta < SERIES_ANGLE {
        1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0
    } else {
        (theta - theta.sin()) / (t2 * theta)
    };
    Matrix3::identity() + k * b + k * k * c
}

fn so3_left_jacobian_inverse(w: &Vector3<f64>, theta: f64) -> Matrix3<f64> {
    let k = hat(w);
    let t2 = theta * theta;
    let c = if theta < SERIES_ANGLE {
        1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    } else {
        let half = 0.5 * theta;
        (1.0 - half * half.cos() / half.sin()) / (theta * theta)
    };
    Matrix3::identity() - k * 0.5 + k * k * c
}

/// SE(3) exponential of `xi * dt`.
pub fn exp_twist(xi: &Twist, dt: f64) -> Result<Pose> {
    if !xi.is_finite() || !dt.is_finite() {
        return Err(Error::invalid("twist or dt is not finite"));
    }
    if dt < 0.0 {
        return Err(Error::invalid(format!("dt must be non-negative, got {dt}")));
    }
    let w = xi.angular * dt;
    let rho = xi.linear * dt;
    let theta = w.norm();
    Ok(Pose {
        rotation: so3_exp(&w),
        translation: so3_left_jacobian(&w, theta) * rho,
    })
}

/// SE(3) logarithm on the principal branch (rotation angle in `[0, pi]`).
pub fn log_pose(p: &Pose) -> Result<Twist> {
    check_rotation(&p.rotation)?;
    let (w, theta) = so3_log(&p.rotation);
    let rho = so3_left_jacobian_inverse(&w, theta) * p.translation;
    Ok(Twist::new(rho, w))
}

/// Translation distance (m) and geodesic rotation angle (degrees) between two poses.
pub fn pose_error(current: &Pose, desired: &Pose) -> (f64, f64) {
    let t_err = (current.translation - desired.translation).norm();
    // R = Ra^T Rb, entry by entry in a fixed summation order: swapping the
    // arguments gives exactly R^T, so the angle is symmetric.
    let r = |i: usize, j: usize| (0..3).fold(0.0, |acc, k| acc + current.rotation[(k, i)] * desired.rotation[(k, j)]);
    let tr = r(0, 0) + r(1, 1) + r(2, 2);
    let s = Vector3::new(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1)).norm();
    // atan2 keeps full precision near 0 and pi where acos does not.
    (t_err, s.atan2(tr - 1.0).to_degrees())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::Unit;

    fn quat_rotation(axis: Vector3<f64>, angle: f64) -> Matrix3<f64> {
        UnitQuaternion::from_axis_angle(&Unit::new_normalize(axis), angle)
            .to_rotation_matrix()
            .into_inner()
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let p = exp_twist(&Twist::zero(), 1.0).unwrap();
        assert_eq!(p, Pose::identity());
    }

    #[test]
    fn exp_pure_translation() {
        let xi = Twist::new(Vector3::new(1.0, 0.0, 0.0), Vector3::zeros());
        let p = exp_twist(&xi, 2.0).unwrap();
        assert_eq!(*p.rotation(), Matrix3::identity());
        assert_eq!(*p.translation(), Vector3::new(2.0, 0.0, 0.0));
    }

    #[test]
    fn exp_quarter_turn_about_z() {
        let xi = Twist::new(Vector3::zeros(), Vector3::new(0.0, 0.0, PI / 2.0));
        let p = exp_twist(&xi, 1.0).unwrap();
        let oracle = quat_rotation(Vector3::z(), PI / 2.0);
        assert_abs_diff_eq!(p.rotation()[(0, 1)], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(*p.rotation(), oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(p.translation().norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn exp_rejects_non_finite_and_negative_dt() {
        let bad = Twist::new(Vector3::new(f64::NAN, 0.0, 0.0), Vector3::zeros());
        assert!(matches!(exp_twist(&bad, 1.0), Err(Error::InvalidArgument(_))));
        assert!(exp_twist(&Twist::zero(), -1.0).is_err());
    }

    #[test]
    fn log_identity_is_zero() {
        assert_eq!(log_pose(&Pose::identity()).unwrap(), Twist::zero());
    }

    #[test]
    fn log_quarter_turn() {
        let r = quat_rotation(Vector3::z(), PI / 2.0);
        let tw = log_pose(&Pose::new(r, Vector3::zeros()).unwrap()).unwrap();
        assert_abs_diff_eq!(tw.angular, Vector3::new(0.0, 0.0, PI / 2.0), epsilon = 1e-9);
        assert_abs_diff_eq!(tw.linear.norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn log_at_pi_uses_symmetric_branch() {
        for axis in [
            Vector3::x(),
            Vector3::new(1.0, 2.0, -0.5).normalize(),
            Vector3::new(0.0, -1.0, 1.0).normalize(),
        ] {
            let r = quat_rotation(axis, PI);
            let p = Pose::new(r, Vector3::new(0.3, -0.2, 1.0)).unwrap();
            let tw = log_pose(&p).unwrap();
            assert_abs_diff_eq!(tw.angular.norm(), PI, epsilon = 1e-9);
            let back = exp_twist(&tw, 1.0).unwrap();
            assert_abs_diff_eq!(*back.rotation(), r, epsilon = 1e-9);
            assert_abs_diff_eq!(*back.translation(), *p.translation(), epsilon = 1e-9);
        }
    }

    #[test]
    fn log_rejects_invalid_rotation() {
        let p = Pose {
            rotation: Matrix3::identity() * 2.0,
            translation: Vector3::zeros(),
        };
        assert!(matches!(log_pose(&p), Err(Error::InvalidArgument(_))));
        assert!(Pose::new(-Matrix3::identity(), Vector3::zeros()).is_err());
    }

    #[test]
    fn small_angle_series_is_continuous() {
        let w = Vector3::new(3e-9, -2e-9, 1e-9);
        for scale in [0.9999, 1.0001] {
            let omega = w * (SMALL_ANGLE * scale / w.norm());
            let p = exp_twist(&Twist::new(Vector3::x(), omega), 1.0).unwrap();
            let oracle = nalgebra::Rotation3::new(omega);
            assert_abs_diff_eq!(*p.rotation(), *oracle.matrix(), epsilon = 1e-15);
            // V x = x + (w x x) / 2 to first order.
            let t = Vector3::x() + omega.cross(&Vector3::x()) * 0.5;
            assert_abs_diff_eq!(*p.translation(), t, epsilon = 1e-15);
        }
    }

    #[test]
    fn pose_error_cases() {
        let a = Pose::identity();
        assert_eq!(pose_error(&a, &a), (0.0, 0.0));

        let b = Pose::from_translation(Vector3::new(0.03, 0.0, 0.04));
        let (t, r) = pose_error(&a, &b);
        assert_abs_diff_eq!(t, 0.05, epsilon = 1e-15);
        assert_eq!(r, 0.0);

        let c = Pose::new(quat_rotation(Vector3::y(), 25f64.to_radians()), Vector3::zeros()).unwrap();
        let (t, r) = pose_error(&a, &c);
        assert_eq!(t, 0.0);
        assert_abs_diff_eq!(r, 25.0, epsilon = 1e-9);
    }

    #[test]
    fn rows_round_trip() {
        let p = Pose::from_axis_angle(&Vector3::new(1.0, 1.0, 0.0), 0.4, Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(Pose::from_rows(&p.to_rows()).unwrap(), p);
    }

    #[test]
    fn quaternion_is_unit_with_non_negative_w() {
        let p = Pose::from_axis_angle(&Vector3::new(0.2, -1.0, 0.3), 3.0, Vector3::zeros());
        let q = p.quaternion();
        assert!(q.w >= 0.0);
        assert_abs_diff_eq!(q.into_inner().norm(), 1.0, epsilon = 1e-12);
    }
}
