//! Foundational types and conversions: pinhole projection, line
//! normalization, and the centered polar parametrization of 2D lines.

mod camera;
mod line;
mod rigid;

pub use camera::{project_point, CameraModel};
pub use line::{clip_line_to_image, hough_to_line, line_to_hough, HoughLine, ImageLine};
pub use rigid::RigidPose;

use thiserror::Error;

/// Scalar type used throughout the library.
pub type Real = f64;

/// 2D point in pixel coordinates.
pub type Point2 = nalgebra::Point2<Real>;
/// 3D point in camera coordinates (meters).
pub type Point3 = nalgebra::Point3<Real>;
/// 3D vector.
pub type Vec3 = nalgebra::Vector3<Real>;
/// Unit-norm 3D direction.
pub type UnitVec3 = nalgebra::Unit<Vec3>;

/// Minimum depth (meters) accepted by the pinhole projection.
pub const MIN_DEPTH: Real = 1e-9;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeometryError {
    #[error("point depth {0} is not positive")]
    NonPositiveDepth(Real),
    #[error("line coefficients (A, B) are numerically zero")]
    DegenerateLine,
    #[error("vector norm {0} too small to normalize")]
    ZeroVector(Real),
    #[error("matrix is not a proper rotation (orthonormality residual {0})")]
    NotARotation(Real),
    #[error("invalid camera model: {0}")]
    InvalidCamera(String),
}

/// Builds a unit vector, rejecting near-zero input.
pub fn unit_vec3(v: Vec3) -> Result<UnitVec3, GeometryError> {
    UnitVec3::try_new(v, 1e-12).ok_or_else(|| GeometryError::ZeroVector(v.norm()))
}

/// Angle in radians between two directions, ignoring sign, in [0, pi/2].
pub fn acute_angle_between(a: &UnitVec3, b: &UnitVec3) -> Real {
    a.dot(b).abs().min(1.0).acos()
}

/// Angle in radians between two directions in [0, pi].
pub fn angle_between(a: &UnitVec3, b: &UnitVec3) -> Real {
    a.dot(b).clamp(-1.0, 1.0).acos()
}
