use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::{GeometryError, Point2, Point3, Real, Vec3, MIN_DEPTH};

/// Pinhole camera intrinsics plus image dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraModel {
    /// Focal length along u (pixels).
    pub fx: Real,
    /// Focal length along v (pixels).
    pub fy: Real,
    /// Principal point u (pixels).
    pub cx: Real,
    /// Principal point v (pixels).
    pub cy: Real,
    /// Image width (pixels).
    pub width: Real,
    /// Image height (pixels).
    pub height: Real,
}

impl CameraModel {
    pub fn new(
        fx: Real,
        fy: Real,
        cx: Real,
        cy: Real,
        width: Real,
        height: Real,
    ) -> Result<Self, GeometryError> {
        let cam = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(GeometryError::InvalidCamera(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err(GeometryError::InvalidCamera(format!(
                "image dimensions must be positive, got {}x{}",
                self.width, self.height
            )));
        }
        if !(0.0..=self.width).contains(&self.cx) || !(0.0..=self.height).contains(&self.cy) {
            return Err(GeometryError::InvalidCamera(format!(
                "principal point ({}, {}) outside image {}x{}",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    /// The intrinsic matrix K.
    pub fn matrix(&self) -> Matrix3<Real> {
        Matrix3::new(
            self.fx, 0.0, self.cx, //
            0.0, self.fy, self.cy, //
            0.0, 0.0, 1.0,
        )
    }

    /// Closed-form K^-1.
    pub fn inverse_matrix(&self) -> Matrix3<Real> {
        Matrix3::new(
            1.0 / self.fx,
            0.0,
            -self.cx / self.fx,
            0.0,
            1.0 / self.fy,
            -self.cy / self.fy,
            0.0,
            0.0,
            1.0,
        )
    }

    /// Half of the image diagonal, the bound on |rho_c| for in-image lines.
    pub fn half_diagonal(&self) -> Real {
        (self.width * self.width + self.height * self.height).sqrt() / 2.0
    }

    /// True when (u, v) lies inside [0, W] x [0, H].
    pub fn contains(&self, p: &Point2) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }

    /// Homogeneous normalized-coordinate vector K^-1 [u, v, 1]^T.
    pub fn pixel_to_normalized(&self, p: &Point2) -> Vec3 {
        Vec3::new((p.x - self.cx) / self.fx, (p.y - self.cy) / self.fy, 1.0)
    }
}

/// Projects a camera-frame point through the pinhole model.
///
/// Returns `(fx*x/z + cx, fy*y/z + cy)`; fails with
/// [`GeometryError::NonPositiveDepth`] when the point is not strictly in
/// front of the camera.
pub fn project_point(camera: &CameraModel, p: &Point3) -> Result<Point2, GeometryError> {
    if p.z <= MIN_DEPTH {
        return Err(GeometryError::NonPositiveDepth(p.z));
    }
    Ok(Point2::new(
        camera.fx * p.x / p.z + camera.cx,
        camera.fy * p.y / p.z + camera.cy,
    ))
}
