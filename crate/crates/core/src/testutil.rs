//! Shared helpers for unit and integration tests.

use nalgebra::UnitQuaternion;
use rand::Rng;

use crate::cylinder::Cylinder3;
use crate::geometry::{unit_vec3, CameraModel, Real, RigidPose, Vec3};
use crate::kinematics::KinematicChain;

pub const EXAMPLE_TOML: &str = include_str!("../../../configs/example_tool.toml");

pub fn example_chain() -> KinematicChain {
    KinematicChain::from_toml_str(EXAMPLE_TOML).unwrap()
}

pub fn camera_224() -> CameraModel {
    CameraModel::new(1000.0, 1000.0, 112.0, 112.0, 224.0, 224.0).unwrap()
}

/// Random end-effector pose with the shaft safely visible: origin inside
/// the central view cone at a depth in [0.10, 0.25] m, arbitrary
/// orientation with the shaft not pointing at the camera.
pub fn random_visible_pose<R: Rng>(rng: &mut R) -> RigidPose {
    loop {
        let z = rng.random_range(0.10..0.25);
        let u = rng.random_range(72.0..152.0);
        let v = rng.random_range(72.0..152.0);
        let cam = camera_224();
        let t = cam.pixel_to_normalized(&crate::geometry::Point2::new(u, v)) * z;
        let rot = UnitQuaternion::from_euler_angles(
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        );
        let pose = RigidPose::new(rot, t);
        let d = pose.z_axis();
        // Keep the shaft from pointing at the camera and its foot in front.
        let foot = t - t.dot(&d) * d.into_inner();
        if foot.norm() > 0.02 && foot.z > 0.03 {
            return pose;
        }
    }
}

/// The shaft cylinder implied by an end-effector pose.
pub fn shaft_of_pose(pose: &RigidPose, radius: Real) -> Cylinder3 {
    Cylinder3::new(
        nalgebra::Point3::from(pose.translation),
        pose.z_axis(),
        radius,
    )
    .unwrap()
}

/// Exact ground-truth observation for a pose: projected shaft edges plus
/// all four keypoints reprojected through FK, confidence 1.
pub fn ground_truth_observation(
    pose: &RigidPose,
    chain: &KinematicChain,
    q: &crate::kinematics::JointState,
    camera: &CameraModel,
) -> crate::solver::FrameObservation {
    use crate::geometry::project_point;
    use crate::solver::KeypointObservation;

    let shaft = shaft_of_pose(pose, chain.shaft_radius());
    let (e1, e2) = crate::cylinder::project_cylinder_edges(&shaft, camera).unwrap();
    let fk = crate::kinematics::forward_kinematics(chain, q).unwrap();
    let keypoints = fk
        .keypoints
        .iter()
        .map(|(id, x)| {
            let px = project_point(camera, &pose.transform_point(x)).unwrap();
            (*id, KeypointObservation::certain(px))
        })
        .collect();
    crate::solver::FrameObservation::new([e1, e2], keypoints).unwrap()
}

pub fn random_unit<R: Rng>(rng: &mut R) -> crate::geometry::UnitVec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        if let Ok(u) = unit_vec3(v) {
            return u;
        }
    }
}
