//! Forward projection of a 3D cylinder to its two silhouette edge lines and
//! the closed-form inverse: recovering the axis direction and the closest
//! centerline point from the two edges and the known radius.
//!
//! The closed-form edge/axis formulas operate on *normalized* image
//! coordinates. A pixel-space line converts contravariantly,
//! `l_norm = K^T * l_pix`, and back with `l_pix = K^-T * l_norm`. Edge
//! coefficient vectors additionally carry an orientation: each is scaled so
//! it evaluates positive on rays through the cylinder interior. The
//! inversion formulas are only valid for edge pairs oriented this way.

use nalgebra::Matrix3;
use thiserror::Error;

use crate::geometry::{
    project_point, unit_vec3, CameraModel, GeometryError, ImageLine, Point2, Point3, Real,
    UnitVec3, Vec3,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CylinderError {
    #[error("camera origin lies inside the cylinder (axis distance {dist} <= radius {radius})")]
    CameraInsideCylinder { dist: Real, radius: Real },
    #[error("cylinder axis passes through the camera origin")]
    DegenerateProjection,
    #[error("edges are parallel or identical")]
    ParallelIdenticalEdges,
    #[error("edge pair is numerically anti-parallel")]
    NumericalInstability,
    #[error("camera ray is parallel to the recovered axis")]
    ParallelRayAxis,
    #[error("invalid cylinder: {0}")]
    InvalidCylinder(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// An infinite cylinder in the camera frame.
#[derive(Debug, Clone, Copy)]
pub struct Cylinder3 {
    /// A point on the centerline (meters).
    pub p0: Point3,
    /// Centerline direction.
    pub d: UnitVec3,
    /// Radius (meters).
    pub r: Real,
}

impl Cylinder3 {
    pub fn new(p0: Point3, d: UnitVec3, r: Real) -> Result<Self, CylinderError> {
        if !(r > 0.0) {
            return Err(CylinderError::InvalidCylinder(format!(
                "radius must be positive, got {r}"
            )));
        }
        Ok(Self { p0, d, r })
    }

    /// Perpendicular foot of the camera origin on the centerline.
    pub fn perpendicular_foot(&self) -> Vec3 {
        self.p0.coords - self.p0.coords.dot(&self.d) * self.d.into_inner()
    }
}

/// The shaft axis recovered from two projected edges.
#[derive(Debug, Clone, Copy)]
pub struct RecoveredAxis {
    /// Closest centerline point to the camera origin (meters).
    pub a: Point3,
    /// Centerline direction, sign-canonicalized (see [`invert_cylinder`]).
    pub d: UnitVec3,
    /// Distance from the camera origin to the centerline.
    pub a_norm: Real,
}

impl RecoveredAxis {
    /// Point on the centerline at parameter `mu`.
    pub fn point_at(&self, mu: Real) -> Point3 {
        Point3::from(self.a.coords + mu * self.d.into_inner())
    }
}

/// Oriented silhouette edges in normalized coordinates: both coefficient
/// vectors evaluate positive on homogeneous rays through the cylinder
/// interior.
fn silhouette_planes(cyl: &Cylinder3) -> Result<(Vec3, Vec3), CylinderError> {
    let foot = cyl.perpendicular_foot();
    let dist2 = foot.norm_squared();
    if dist2 < 1e-20 {
        return Err(CylinderError::DegenerateProjection);
    }
    let half_chord2 = dist2 - cyl.r * cyl.r;
    if half_chord2 <= 0.0 {
        return Err(CylinderError::CameraInsideCylinder {
            dist: dist2.sqrt(),
            radius: cyl.r,
        });
    }
    let swing = half_chord2.sqrt() * cyl.d.cross(&cyl.p0.coords);
    let e1 = cyl.r * foot + swing;
    let e2 = cyl.r * foot - swing;
    Ok((e1, e2))
}

/// Projects a cylinder to its two silhouette edges as canonical pixel-space
/// lines.
pub fn project_cylinder_edges(
    cyl: &Cylinder3,
    camera: &CameraModel,
) -> Result<(ImageLine, ImageLine), CylinderError> {
    let (e1, e2) = silhouette_planes(cyl)?;
    Ok((
        normalized_to_pixel_line(&e1, camera)?,
        normalized_to_pixel_line(&e2, camera)?,
    ))
}

/// Projects a cylinder to oriented normalized-coordinate edge vectors, the
/// exact form consumed by [`invert_cylinder`].
pub fn project_cylinder_edges_normalized(
    cyl: &Cylinder3,
) -> Result<(Vec3, Vec3), CylinderError> {
    silhouette_planes(cyl)
}

/// Converts a pixel-space line to a normalized-coordinate edge vector.
///
/// The result's orientation is inherited from the canonical pixel form and
/// must still be fixed with [`orient_edge_pair`] before inversion.
pub fn pixel_line_to_normalized(line: &ImageLine, camera: &CameraModel) -> Vec3 {
    let [a, b, c] = line.coefficients();
    camera.matrix().transpose() * Vec3::new(a, b, c)
}

/// Converts a normalized-coordinate edge vector to a canonical pixel line.
pub fn normalized_to_pixel_line(
    edge: &Vec3,
    camera: &CameraModel,
) -> Result<ImageLine, CylinderError> {
    let l = camera.inverse_matrix().transpose() * edge;
    Ok(ImageLine::new(l.x, l.y, l.z)?)
}

/// Flips edge signs so both evaluate positive at an interior ray.
///
/// `interior` is the homogeneous normalized-coordinate vector of any pixel
/// strictly between the two edges; the projection of any centerline point
/// qualifies.
pub fn orient_edge_pair(e1: Vec3, e2: Vec3, interior: &Vec3) -> (Vec3, Vec3) {
    let fix = |e: Vec3| if e.dot(interior) < 0.0 { -e } else { e };
    (fix(e1), fix(e2))
}

/// Flips a direction so its first significant component of (z, x, y) is
/// positive. The inversion leaves the axis sign ambiguous; this makes it
/// deterministic.
fn canonical_direction(d: UnitVec3) -> UnitVec3 {
    let v = d.into_inner();
    for comp in [v.z, v.x, v.y] {
        if comp > 1e-12 {
            return d;
        }
        if comp < -1e-12 {
            return UnitVec3::new_unchecked(-v);
        }
    }
    d
}

/// Recovers the shaft axis from two oriented normalized-coordinate edges
/// and the known radius.
///
/// The returned direction is sign-canonicalized (z component positive when
/// significant); callers that need the physical distal direction must
/// disambiguate with keypoint evidence.
pub fn invert_cylinder(e1: &Vec3, e2: &Vec3, r: Real) -> Result<RecoveredAxis, CylinderError> {
    let n1 = unit_vec3(*e1)?.into_inner();
    let n2 = unit_vec3(*e2)?.into_inner();
    let v_plus = (n1 + n2) / 2.0;
    let v_minus = (n1 - n2) / 2.0;
    if v_minus.norm() < 1e-9 {
        return Err(CylinderError::ParallelIdenticalEdges);
    }
    let cos_term = 1.0 + n1.dot(&n2);
    if cos_term < 1e-12 {
        return Err(CylinderError::NumericalInstability);
    }
    let a_hat = unit_vec3(v_plus).map_err(|_| CylinderError::NumericalInstability)?;
    let d = unit_vec3(v_minus.cross(&a_hat))
        .map_err(|_| CylinderError::NumericalInstability)?;
    let a_norm = r * (2.0 / cos_term).sqrt();
    Ok(RecoveredAxis {
        a: Point3::from(a_norm * a_hat.into_inner()),
        d: canonical_direction(d),
        a_norm,
    })
}

/// Convenience wrapper: converts two canonical pixel lines to oriented
/// normalized edges (using `interior_px`, typically the shaft-end keypoint,
/// as the inside hint) and inverts.
pub fn invert_cylinder_pixel_lines(
    l1: &ImageLine,
    l2: &ImageLine,
    r: Real,
    camera: &CameraModel,
    interior_px: &Point2,
) -> Result<RecoveredAxis, CylinderError> {
    let interior = camera.pixel_to_normalized(interior_px);
    let (e1, e2) = orient_edge_pair(
        pixel_line_to_normalized(l1, camera),
        pixel_line_to_normalized(l2, camera),
        &interior,
    );
    invert_cylinder(&e1, &e2, r)
}

/// Intersects the camera ray through `u0` with the recovered centerline.
///
/// Solves the two-variable least-squares problem for the ray parameter
/// `lambda` and the line parameter `mu`, and returns the closest point *on
/// the centerline*, `a + mu* d`.
pub fn ray_centerline_intersection(
    camera: &CameraModel,
    axis: &RecoveredAxis,
    u0: &Point2,
) -> Result<Point3, CylinderError> {
    let ray = unit_vec3(camera.pixel_to_normalized(u0))?;
    let d = axis.d.into_inner();
    let c = ray.dot(&d);
    let denom = 1.0 - c * c;
    if c.abs() > 1.0 - 1e-9 || denom <= 0.0 {
        return Err(CylinderError::ParallelRayAxis);
    }
    let ra = ray.dot(&axis.a.coords);
    let da = d.dot(&axis.a.coords);
    let mu = (c * ra - da) / denom;
    Ok(axis.point_at(mu))
}

/// Rotation aligning the z-axis to `d` via the Rodrigues formula
/// `R = I + [v]x + [v]x^2 (1-c)/s^2` with `v = z x d`, `s = |v|`,
/// `c = z . d`.
///
/// Degenerate branches: `s = 0, c = +1` yields the identity; `s = 0,
/// c = -1` yields the rotation by pi about the x-axis, `diag(1, -1, -1)`.
pub fn align_rotation(d: &UnitVec3) -> Matrix3<Real> {
    let z = Vec3::z();
    let v = z.cross(d);
    let s2 = v.norm_squared();
    let c = z.dot(d);
    if s2 < 1e-28 {
        return if c >= 0.0 {
            Matrix3::identity()
        } else {
            Matrix3::from_diagonal(&Vec3::new(1.0, -1.0, -1.0))
        };
    }
    let vx = skew(&v);
    Matrix3::identity() + vx + vx * vx * ((1.0 - c) / s2)
}

fn skew(v: &Vec3) -> Matrix3<Real> {
    Matrix3::new(
        0.0, -v.z, v.y, //
        v.z, 0.0, -v.x, //
        -v.y, v.x, 0.0,
    )
}

/// Dense samples of the silhouette generator curves projected to pixels.
/// Test oracle for edge tangency: every returned point must lie on one of
/// the projected edges.
#[doc(hidden)]
pub fn sample_silhouette_pixels(
    cyl: &Cylinder3,
    camera: &CameraModel,
    axial_range: Real,
    steps: usize,
) -> Vec<Point2> {
    let mut out = Vec::new();
    let Ok((e1, e2)) = silhouette_planes(cyl) else {
        return out;
    };
    for e in [e1, e2] {
        let n = e.normalize();
        for i in 0..steps {
            let t = axial_range * (2.0 * i as Real / (steps - 1) as Real - 1.0);
            // Tangency generator: the surface point on the tangent plane.
            let p = cyl.p0.coords + t * cyl.d.into_inner() - cyl.r * n;
            if p.z > 1e-6 {
                if let Ok(px) = project_point(camera, &Point3::from(p)) {
                    out.push(px);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn cam() -> CameraModel {
        CameraModel::new(1000.0, 1000.0, 112.0, 112.0, 224.0, 224.0).unwrap()
    }

    fn horizontal_cylinder() -> Cylinder3 {
        Cylinder3::new(
            Point3::new(0.0, 0.0, 0.10),
            unit_vec3(Vec3::x()).unwrap(),
            0.004,
        )
        .unwrap()
    }

    /// Random cylinder whose perpendicular foot is safely in front of the
    /// camera and well outside the radius.
    fn random_visible_cylinder(rng: &mut StdRng) -> Cylinder3 {
        loop {
            let p0 = Point3::new(
                rng.random_range(-0.03..0.03),
                rng.random_range(-0.03..0.03),
                rng.random_range(0.08..0.3),
            );
            let d = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let Ok(d) = unit_vec3(d) else { continue };
            let r = rng.random_range(0.002..0.008);
            let cyl = Cylinder3::new(p0, d, r).unwrap();
            let foot = cyl.perpendicular_foot();
            if foot.norm() > 3.0 * r && foot.z > 0.02 {
                return cyl;
            }
        }
    }

    #[test]
    fn horizontal_axis_produces_symmetric_horizontal_edges() {
        let (l1, l2) = project_cylinder_edges(&horizontal_cylinder(), &cam()).unwrap();
        for l in [&l1, &l2] {
            assert_relative_eq!(l.a(), 0.0, epsilon = 1e-12);
            assert_relative_eq!(l.b(), 1.0, epsilon = 1e-12);
        }
        // v-intercepts symmetric about v = 112.
        let v1 = -l1.c();
        let v2 = -l2.c();
        assert_relative_eq!((v1 + v2) / 2.0, 112.0, epsilon = 1e-9);
        assert!((v1 - v2).abs() > 1.0);
    }

    #[test]
    fn rotating_cylinder_about_optical_axis_rotates_edges() {
        // 90 degree rotation about z maps the x-axis cylinder to a y-axis one.
        let cyl = Cylinder3::new(
            Point3::new(0.0, 0.0, 0.10),
            unit_vec3(Vec3::y()).unwrap(),
            0.004,
        )
        .unwrap();
        let (l1, l2) = project_cylinder_edges(&cyl, &cam()).unwrap();
        for l in [&l1, &l2] {
            assert_relative_eq!(l.b(), 0.0, epsilon = 1e-12);
            assert_relative_eq!(l.a(), 1.0, epsilon = 1e-12);
        }
        let u1 = -l1.c();
        let u2 = -l2.c();
        assert_relative_eq!((u1 + u2) / 2.0, 112.0, epsilon = 1e-9);
    }

    #[test]
    fn edges_are_tangent_to_projected_silhouette() {
        let mut rng = StdRng::seed_from_u64(11);
        let camera = cam();
        for _ in 0..50 {
            let cyl = random_visible_cylinder(&mut rng);
            let Ok((l1, l2)) = project_cylinder_edges(&cyl, &camera) else {
                continue;
            };
            let samples = sample_silhouette_pixels(&cyl, &camera, 0.02, 64);
            assert!(!samples.is_empty());
            for px in samples {
                let dist = l1.distance(&px).min(l2.distance(&px));
                assert!(dist <= 0.5, "silhouette sample {px} off both edges: {dist}");
            }
        }
    }

    #[test]
    fn camera_inside_cylinder_is_rejected() {
        let cyl = Cylinder3::new(
            Point3::new(0.0, 0.0, 0.003),
            unit_vec3(Vec3::x()).unwrap(),
            0.004,
        )
        .unwrap();
        assert!(matches!(
            project_cylinder_edges(&cyl, &cam()),
            Err(CylinderError::CameraInsideCylinder { .. })
        ));
    }

    #[test]
    fn axis_through_origin_is_degenerate() {
        let cyl = Cylinder3::new(
            Point3::new(0.0, 0.0, 0.1),
            unit_vec3(Vec3::z()).unwrap(),
            0.004,
        )
        .unwrap();
        assert!(matches!(
            project_cylinder_edges(&cyl, &cam()),
            Err(CylinderError::DegenerateProjection)
        ));
    }

    #[test]
    fn inversion_recovers_horizontal_cylinder() {
        let cyl = horizontal_cylinder();
        let (e1, e2) = project_cylinder_edges_normalized(&cyl).unwrap();
        let axis = invert_cylinder(&e1, &e2, cyl.r).unwrap();
        assert_relative_eq!(axis.a_norm, 0.10, epsilon = 1e-12);
        assert_relative_eq!((axis.a.coords - Vec3::new(0.0, 0.0, 0.10)).norm(), 0.0, epsilon = 1e-9);
        assert!(axis.d.dot(&Vec3::x()).abs() > 1.0 - 1e-9);
    }

    #[test]
    fn inversion_round_trip_on_random_cylinders() {
        let mut rng = StdRng::seed_from_u64(23);
        for _ in 0..1000 {
            let cyl = random_visible_cylinder(&mut rng);
            let (e1, e2) = project_cylinder_edges_normalized(&cyl).unwrap();
            let axis = invert_cylinder(&e1, &e2, cyl.r).unwrap();

            let angular = axis.d.cross(&cyl.d).norm().asin();
            assert!(angular < 1e-6, "axis angular error {angular}");

            let foot = cyl.perpendicular_foot();
            let rel = (axis.a.coords - foot).norm() / foot.norm();
            assert!(rel < 1e-6, "foot relative error {rel}");
            assert_relative_eq!(axis.a.coords.dot(&axis.d), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn pixel_line_round_trip_matches_normalized_inversion() {
        let mut rng = StdRng::seed_from_u64(37);
        let camera = cam();
        for _ in 0..100 {
            let cyl = random_visible_cylinder(&mut rng);
            let (l1, l2) = project_cylinder_edges(&cyl, &camera).unwrap();
            // Interior hint: projection of the foot point.
            let foot = Point3::from(cyl.perpendicular_foot());
            let hint = project_point(&camera, &foot).unwrap();
            let axis = invert_cylinder_pixel_lines(&l1, &l2, cyl.r, &camera, &hint).unwrap();
            let angular = axis.d.cross(&cyl.d).norm().asin();
            assert!(angular < 1e-6);
            assert!((axis.a.coords - foot.coords).norm() < 1e-6);
        }
    }

    #[test]
    fn identical_edges_are_rejected() {
        let e = Vec3::new(0.1, 0.2, 0.05);
        assert!(matches!(
            invert_cylinder(&e, &e, 0.004),
            Err(CylinderError::ParallelIdenticalEdges)
        ));
    }

    #[test]
    fn antiparallel_edges_are_unstable() {
        let e = Vec3::new(0.1, 0.2, 0.05);
        assert!(matches!(
            invert_cylinder(&e, &(-e), 0.004),
            Err(CylinderError::NumericalInstability)
        ));
    }

    #[test]
    fn ray_intersection_recovers_centerline_points() {
        let mut rng = StdRng::seed_from_u64(51);
        let camera = cam();
        for _ in 0..200 {
            let cyl = random_visible_cylinder(&mut rng);
            let (e1, e2) = project_cylinder_edges_normalized(&cyl).unwrap();
            let axis = invert_cylinder(&e1, &e2, cyl.r).unwrap();
            // Pick a centerline point in front of the camera.
            let q = Point3::from(cyl.p0.coords + 0.01 * cyl.d.into_inner());
            if q.z < 0.02 {
                continue;
            }
            let u0 = project_point(&camera, &q).unwrap();
            let p = ray_centerline_intersection(&camera, &axis, &u0).unwrap();
            assert!(
                (p.coords - q.coords).norm() < 1e-9,
                "intersection error {}",
                (p.coords - q.coords).norm()
            );
        }
    }

    #[test]
    fn ray_intersection_matches_least_squares_oracle() {
        // Independent oracle: solve the 2x2 normal equations directly.
        let mut rng = StdRng::seed_from_u64(67);
        let camera = cam();
        for _ in 0..200 {
            let cyl = random_visible_cylinder(&mut rng);
            let (e1, e2) = project_cylinder_edges_normalized(&cyl).unwrap();
            let axis = invert_cylinder(&e1, &e2, cyl.r).unwrap();
            let u0 = Point2::new(rng.random_range(10.0..214.0), rng.random_range(10.0..214.0));

            let ray = camera.pixel_to_normalized(&u0).normalize();
            let d = axis.d.into_inner();
            let m = nalgebra::Matrix2::new(1.0, -ray.dot(&d), -ray.dot(&d), 1.0);
            let rhs = nalgebra::Vector2::new(ray.dot(&axis.a.coords), -d.dot(&axis.a.coords));
            let Some(sol) = m.lu().solve(&rhs) else { continue };
            let expected = axis.a.coords + sol[1] * d;

            let p = ray_centerline_intersection(&camera, &axis, &u0).unwrap();
            assert!((p.coords - expected).norm() < 1e-9);
            // Result stays on the centerline.
            let off_axis = (p.coords - axis.a.coords).cross(&d).norm();
            assert!(off_axis < 1e-9);
        }
    }

    #[test]
    fn ray_intersection_is_invariant_to_axis_reparametrization() {
        let cyl = horizontal_cylinder();
        let (e1, e2) = project_cylinder_edges_normalized(&cyl).unwrap();
        let axis = invert_cylinder(&e1, &e2, cyl.r).unwrap();
        let shifted = RecoveredAxis {
            a: axis.point_at(0.05),
            d: axis.d,
            a_norm: axis.a_norm,
        };
        let u0 = Point2::new(150.0, 100.0);
        let p1 = ray_centerline_intersection(&cam(), &axis, &u0).unwrap();
        let p2 = ray_centerline_intersection(&cam(), &shifted, &u0).unwrap();
        assert!((p1.coords - p2.coords).norm() < 1e-9);
    }

    #[test]
    fn parallel_ray_is_rejected() {
        // Axis along the optical axis direction but offset from the origin,
        // with the ray through the principal point (direction z).
        let axis = RecoveredAxis {
            a: Point3::new(0.05, 0.0, 0.0),
            d: unit_vec3(Vec3::z()).unwrap(),
            a_norm: 0.05,
        };
        let err = ray_centerline_intersection(&cam(), &axis, &Point2::new(112.0, 112.0));
        assert!(matches!(err, Err(CylinderError::ParallelRayAxis)));
    }

    #[test]
    fn align_rotation_z_is_identity() {
        let r = align_rotation(&unit_vec3(Vec3::z()).unwrap());
        assert_relative_eq!((r - Matrix3::identity()).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn align_rotation_neg_z_is_pi_about_x() {
        let r = align_rotation(&unit_vec3(-Vec3::z()).unwrap());
        let expected = Matrix3::from_diagonal(&Vec3::new(1.0, -1.0, -1.0));
        assert_relative_eq!((r - expected).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn align_rotation_maps_z_to_target() {
        let mut rng = StdRng::seed_from_u64(93);
        for _ in 0..500 {
            let d = unit_vec3(Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ));
            let Ok(d) = d else { continue };
            let r = align_rotation(&d);
            assert!((r * Vec3::z() - d.into_inner()).norm() < 1e-12);
            assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-12);
            assert_relative_eq!(r.determinant(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn align_rotation_handles_near_pole_directions() {
        for eps in [1e-6, 1e-9, 1e-13, 0.0] {
            for sign in [1.0, -1.0] {
                let d = unit_vec3(Vec3::new(eps, -eps / 2.0, sign)).unwrap();
                let r = align_rotation(&d);
                assert!((r * Vec3::z() - d.into_inner()).norm() < 1e-11);
                assert_relative_eq!(r.determinant(), 1.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn align_rotation_x_axis() {
        let r = align_rotation(&unit_vec3(Vec3::x()).unwrap());
        assert!((r * Vec3::z() - Vec3::x()).norm() < 1e-15);
        assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-14);
    }
}
