//! Pinhole camera intrinsics. No distortion model.
//!
//! Pixel `(c, r)` of an image has its center at continuous coordinates
//! `(u, v) = (c, r)`; the image covers `[-0.5, width - 0.5) x [-0.5, height - 0.5)`.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for Intrinsics {
    /// 128x128 image with a roughly 65 degree field of view.
    fn default() -> Self {
        Self {
            fx: 100.0,
            fy: 100.0,
            cx: 64.0,
            cy: 64.0,
            width: 128,
            height: 128,
        }
    }
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.fx.is_finite()
            && self.fy.is_finite()
            && self.cx >= 0.0
            && self.cy >= 0.0
            && self.cx < self.width as f64
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid intrinsics {self:?}")))
        }
    }

    /// Whether a continuous pixel coordinate lies on the image.
    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= -0.5 && v >= -0.5 && u < self.width as f64 - 0.5 && v < self.height as f64 - 0.5
    }

    /// Pixel to normalized image coordinates.
    pub fn normalize(&self, u: f64, v: f64) -> (f64, f64) {
        ((u - self.cx) / self.fx, (v - self.cy) / self.fy)
    }

    /// Camera-frame point on the viewing ray of `(u, v)` at z-depth `depth`.
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Vector3<f64> {
        let (x, y) = self.normalize(u, v);
        Vector3::new(x * depth, y * depth, depth)
    }

    /// Viewing-ray direction of `(u, v)` with unit z-component.
    pub fn ray(&self, u: f64, v: f64) -> Vector3<f64> {
        self.unproject(u, v, 1.0)
    }
}

/// Pinhole projection of a camera-frame point.
pub fn project(point_cam: &Vector3<f64>, k: &Intrinsics) -> Result<Vector2<f64>> {
    let z = point_cam.z;
    if !(z > 0.0) {
        return Err(Error::BehindCamera { z });
    }
    Ok(Vector2::new(
        k.fx * point_cam.x / z + k.cx,
        k.fy * point_cam.y / z + k.cy,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn k500() -> Intrinsics {
        Intrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap()
    }

    #[test]
    fn principal_point() {
        let p = project(&Vector3::new(0.0, 0.0, 1.0), &k500()).unwrap();
        assert_eq!(p, Vector2::new(320.0, 240.0));
    }

    #[test]
    fn off_axis_u() {
        let p = project(&Vector3::new(1.0, 0.0, 2.0), &k500()).unwrap();
        assert_eq!(p.x, 570.0);
    }

    #[test]
    fn hand_evaluated_point_and_ray_cast_back() {
        let k = k500();
        let p = project(&Vector3::new(0.1, -0.2, 0.5), &k).unwrap();
        assert_abs_diff_eq!(p, Vector2::new(420.0, 40.0), epsilon = 1e-12);
        let back = k.unproject(p.x, p.y, 0.5);
        assert_abs_diff_eq!(back, Vector3::new(0.1, -0.2, 0.5), epsilon = 1e-12);
    }

    #[test]
    fn behind_camera_is_an_error() {
        let k = k500();
        assert!(matches!(
            project(&Vector3::new(0.0, 0.0, 0.0), &k),
            Err(Error::BehindCamera { .. })
        ));
        assert!(project(&Vector3::new(0.0, 0.0, -1.0), &k).is_err());
    }

    #[test]
    fn invalid_intrinsics_rejected() {
        assert!(Intrinsics::new(0.0, 1.0, 1.0, 1.0, 4, 4).is_err());
        assert!(Intrinsics::new(1.0, 1.0, 4.0, 1.0, 4, 4).is_err());
        assert!(Intrinsics::new(1.0, 1.0, -0.1, 1.0, 4, 4).is_err());
    }
}
