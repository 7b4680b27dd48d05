use nalgebra::{Matrix3, Quaternion, UnitQuaternion};

use super::{GeometryError, Point3, Real, UnitVec3, Vec3};

/// A rigid transform: rotation followed by translation.
///
/// Used for the camera-to-end-effector pose, where it maps end-effector
/// frame coordinates into camera coordinates: `x_cam = R * x_ee + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidPose {
    pub rotation: UnitQuaternion<Real>,
    pub translation: Vec3,
}

impl RigidPose {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<Real>, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    /// Builds a pose from a rotation matrix, validating orthonormality and
    /// a positive determinant to 1e-9.
    pub fn from_matrix(r: &Matrix3<Real>, translation: Vec3) -> Result<Self, GeometryError> {
        let residual = (r.transpose() * r - Matrix3::identity()).norm();
        let det_residual = (r.determinant() - 1.0).abs();
        if residual > 1e-9 || det_residual > 1e-9 {
            return Err(GeometryError::NotARotation(residual.max(det_residual)));
        }
        let rot = nalgebra::Rotation3::from_matrix_unchecked(*r);
        Ok(Self {
            rotation: UnitQuaternion::from_rotation_matrix(&rot),
            translation,
        })
    }

    /// Quaternion components in (w, x, y, z) order.
    pub fn quaternion_wxyz(&self) -> [Real; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    /// Builds a pose from (w, x, y, z) quaternion components.
    pub fn from_quaternion_wxyz(wxyz: [Real; 4], translation: Vec3) -> Result<Self, GeometryError> {
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        let norm = q.norm();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(GeometryError::NotARotation((norm - 1.0).abs()));
        }
        Ok(Self {
            rotation: UnitQuaternion::new_normalize(q),
            translation,
        })
    }

    pub fn rotation_matrix(&self) -> Matrix3<Real> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn transform_point(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn compose(&self, other: &RigidPose) -> RigidPose {
        RigidPose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidPose {
        let inv_rot = self.rotation.inverse();
        RigidPose {
            rotation: inv_rot,
            translation: -(inv_rot * self.translation),
        }
    }

    /// The rotation's z-axis column, e.g. the shaft direction for an
    /// end-effector pose.
    pub fn z_axis(&self) -> UnitVec3 {
        UnitVec3::new_unchecked(self.rotation * Vec3::z())
    }

    /// Geodesic rotation distance to another pose, in radians.
    pub fn rotation_angle_to(&self, other: &RigidPose) -> Real {
        (self.rotation.inverse() * other.rotation).angle()
    }

    /// Euclidean translation distance to another pose, in meters.
    pub fn translation_distance_to(&self, other: &RigidPose) -> Real {
        (self.translation - other.translation).norm()
    }
}
