//! Oracle dataset generation: domain-randomized end-effector poses with
//! exact projective labels (shaft edges, centered polar parameters,
//! keypoint pixels) and a parametric noise model emulating detector error.
//!
//! Rendering is analytic only: labels come from the cylinder projection
//! and the pinhole model, plus an optional silhouette raster for
//! exercising the edge refinement stage.

mod dataset;

pub use dataset::{
    frame_file_name, generate_dataset, load_frame, load_manifest, observation_from_record,
    raster_file_name, FrameRecord, HoughRecord, KeypointRecord, LineRecord, Manifest,
    ObservationRecord, PoseRecord,
};

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::UnitQuaternion;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cylinder::{project_cylinder_edges, Cylinder3, CylinderError};
use crate::geometry::{
    hough_to_line, line_to_hough, project_point, CameraModel, GeometryError, HoughLine,
    ImageLine, Point2, Real, RigidPose, UnitVec3, Vec3,
};
use crate::kinematics::{
    forward_kinematics, raw_keypoints, JointState, KeypointId, KinematicChain, KinematicsError,
};
use crate::solver::{FrameObservation, KeypointObservation};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("sampling exhausted after {attempts} attempts; check depth range and camera")]
    SamplingExhausted { attempts: usize },
    #[error("invalid randomizer config: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("dataset schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Cylinder(#[from] CylinderError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Detector-noise model. All parameters default to zero, which reproduces
/// the ground-truth labels exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Isotropic Gaussian keypoint noise (pixels).
    pub keypoint_sigma_px: Real,
    /// Gaussian noise on the edge angle (radians).
    pub edge_angle_sigma_rad: Real,
    /// Gaussian noise on the edge offset (pixels).
    pub edge_offset_sigma_px: Real,
    /// Per-keypoint dropout probability (outer-roll is never dropped).
    pub keypoint_dropout_prob: Real,
    /// Probability of displacing one wrist/tip keypoint by the outlier
    /// magnitude.
    pub outlier_prob: Real,
    /// Outlier displacement (pixels).
    pub outlier_magnitude_px: Real,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            keypoint_sigma_px: 0.0,
            edge_angle_sigma_rad: 0.0,
            edge_offset_sigma_px: 0.0,
            keypoint_dropout_prob: 0.0,
            outlier_prob: 0.0,
            outlier_magnitude_px: 0.0,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let err = |m: String| Err(SynthError::InvalidConfig(m));
        for (name, s) in [
            ("keypoint_sigma_px", self.keypoint_sigma_px),
            ("edge_angle_sigma_rad", self.edge_angle_sigma_rad),
            ("edge_offset_sigma_px", self.edge_offset_sigma_px),
            ("outlier_magnitude_px", self.outlier_magnitude_px),
        ] {
            if !(s >= 0.0) {
                return err(format!("{name} must be >= 0, got {s}"));
            }
        }
        for (name, p) in [
            ("keypoint_dropout_prob", self.keypoint_dropout_prob),
            ("outlier_prob", self.outlier_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return err(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        Ok(())
    }
}

/// Domain-randomization parameters for scene sampling.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomizerConfig {
    pub seed: u64,
    /// Number of frames to generate.
    pub n: usize,
    /// End-effector depth range along the camera axis (millimeters).
    pub depth_range_mm: [Real; 2],
    /// Gripper-jaw angle range (radians per jaw).
    pub gripper_angle_range_rad: [Real; 2],
    /// Reference camera-to-base transform from a real setup. Recorded in
    /// the manifest for provenance; the geometric sampler anchors directly
    /// to the camera view.
    pub reference_cam_to_base: PoseRecord,
    /// Rejection-sampling budget per frame.
    pub max_attempts: usize,
    /// Also write anti-aliased silhouette rasters (PGM).
    pub write_rasters: bool,
    /// Rendered shaft length for rasters (meters).
    pub shaft_render_length_m: Real,
    pub noise: NoiseConfig,
}

impl Default for RandomizerConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n: 1,
            depth_range_mm: [110.0, 230.0],
            gripper_angle_range_rad: [0.15, 0.9],
            reference_cam_to_base: PoseRecord::identity(),
            max_attempts: 10_000,
            write_rasters: false,
            shaft_render_length_m: 0.3,
            noise: NoiseConfig::default(),
        }
    }
}

impl RandomizerConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let err = |m: String| Err(SynthError::InvalidConfig(m));
        let [z0, z1] = self.depth_range_mm;
        if !(z0 <= z1) {
            return err(format!("depth_range_mm [{z0}, {z1}] not ordered"));
        }
        let [g0, g1] = self.gripper_angle_range_rad;
        if !(g0 <= g1) {
            return err(format!("gripper_angle_range_rad [{g0}, {g1}] not ordered"));
        }
        if self.max_attempts == 0 {
            return err("max_attempts must be >= 1".into());
        }
        if !(self.shaft_render_length_m > 0.0) {
            return err("shaft_render_length_m must be positive".into());
        }
        self.noise.validate()
    }
}

/// One generated scene with its exact labels.
#[derive(Debug, Clone)]
pub struct SceneSample {
    /// Camera-to-end-effector transform (maps ee coordinates into the
    /// camera frame).
    pub pose_gt: RigidPose,
    pub q: JointState,
    pub edges_gt: (ImageLine, ImageLine),
    pub hough_gt: (HoughLine, HoughLine),
    pub keypoints_gt: BTreeMap<KeypointId, Point2>,
    pub camera: CameraModel,
}

impl SceneSample {
    /// The shaft cylinder implied by the pose and chain radius.
    pub fn shaft(&self, chain: &KinematicChain) -> Cylinder3 {
        Cylinder3::new(
            nalgebra::Point3::from(self.pose_gt.translation),
            self.pose_gt.z_axis(),
            chain.shaft_radius(),
        )
        .expect("radius validated at chain load")
    }
}

/// Rejection-samples one visible scene: camera roll uniform in [-pi, pi],
/// end-effector depth inside the configured range, all four keypoints
/// inside the image, and the shaft projection well-defined. Deterministic
/// for a given RNG state.
pub fn sample_scene<R: Rng>(
    cfg: &RandomizerConfig,
    chain: &KinematicChain,
    camera: &CameraModel,
    rng: &mut R,
) -> Result<SceneSample, SynthError> {
    cfg.validate()?;
    camera.validate()?;
    let [z0_m, z1_m] = [
        cfg.depth_range_mm[0] / 1000.0,
        cfg.depth_range_mm[1] / 1000.0,
    ];
    let ranges = chain.sampling_ranges(cfg.gripper_angle_range_rad);

    for _ in 0..cfg.max_attempts {
        // Camera roll about the optical axis (applied to the whole scene).
        let phi = rng.random_range(-PI..PI);
        // Visible position: a view ray through a uniform pixel, at a
        // uniform depth.
        let depth = rng.random_range(z0_m..=z1_m);
        let px = Point2::new(
            rng.random_range(0.0..camera.width),
            rng.random_range(0.0..camera.height),
        );
        // Shaft direction uniform on the sphere, roll uniform.
        let dir = random_unit(rng);
        let gamma = rng.random_range(-PI..PI);
        // Gripper and wrist articulation.
        let q = JointState(
            ranges
                .iter()
                .map(|[lo, hi]| rng.random_range(*lo..=*hi))
                .collect(),
        );

        let translation = camera.pixel_to_normalized(&px) * depth;
        let rotation = nalgebra::Rotation3::from_matrix_unchecked(
            crate::cylinder::align_rotation(&dir),
        );
        let roll_cam = UnitQuaternion::from_axis_angle(&UnitVec3::new_unchecked(Vec3::z()), phi);
        let pose = RigidPose::new(
            roll_cam
                * UnitQuaternion::from_rotation_matrix(&rotation)
                * UnitQuaternion::from_axis_angle(&UnitVec3::new_unchecked(Vec3::z()), gamma),
            roll_cam * translation,
        );

        if pose.translation.z < z0_m - 1e-12 || pose.translation.z > z1_m + 1e-12 {
            continue;
        }
        let Ok(sample) = label_scene(&pose, &q, chain, camera) else {
            continue;
        };
        if sample
            .keypoints_gt
            .values()
            .all(|px| camera.contains(px))
        {
            return Ok(sample);
        }
    }
    Err(SynthError::SamplingExhausted {
        attempts: cfg.max_attempts,
    })
}

/// Computes the exact labels for a given pose and joint state.
pub fn label_scene(
    pose: &RigidPose,
    q: &JointState,
    chain: &KinematicChain,
    camera: &CameraModel,
) -> Result<SceneSample, SynthError> {
    let shaft = Cylinder3::new(
        nalgebra::Point3::from(pose.translation),
        pose.z_axis(),
        chain.shaft_radius(),
    )?;
    let (e1, e2) = project_cylinder_edges(&shaft, camera)?;
    let fk = raw_keypoints(chain, q, pose)?;
    let mut keypoints_gt = BTreeMap::new();
    for (id, x_cam) in &fk.keypoints {
        keypoints_gt.insert(*id, project_point(camera, x_cam)?);
    }
    Ok(SceneSample {
        pose_gt: *pose,
        q: q.clone(),
        edges_gt: (e1, e2),
        hough_gt: (line_to_hough(&e1, camera), line_to_hough(&e2, camera)),
        keypoints_gt,
        camera: *camera,
    })
}

/// Applies the detector-noise model to exact labels. With all noise
/// parameters zero the observation equals the ground truth bit-exactly.
pub fn apply_noise<R: Rng>(
    sample: &SceneSample,
    noise: &NoiseConfig,
    rng: &mut R,
) -> FrameObservation {
    let gauss = Normal::new(0.0, 1.0).expect("unit normal");

    // Keypoints: Gaussian perturbation, then dropout, then one optional
    // outlier displacement.
    let mut keypoints: BTreeMap<KeypointId, KeypointObservation> = BTreeMap::new();
    for (id, gt) in &sample.keypoints_gt {
        let dx = noise.keypoint_sigma_px * gauss.sample(rng);
        let dy = noise.keypoint_sigma_px * gauss.sample(rng);
        keypoints.insert(
            *id,
            KeypointObservation::certain(Point2::new(gt.x + dx, gt.y + dy)),
        );
    }
    for id in [KeypointId::WristYaw, KeypointId::TipA, KeypointId::TipB] {
        if keypoints.contains_key(&id) && rng.random_range(0.0..1.0) < noise.keypoint_dropout_prob
        {
            keypoints.remove(&id);
        }
    }
    if rng.random_range(0.0..1.0) < noise.outlier_prob {
        let victims: Vec<KeypointId> = keypoints
            .keys()
            .copied()
            .filter(|id| *id != KeypointId::OuterRoll)
            .collect();
        if !victims.is_empty() {
            let victim = victims[rng.random_range(0..victims.len())];
            let angle = rng.random_range(0.0..2.0 * PI);
            let obs = keypoints.get_mut(&victim).expect("victim present");
            obs.position.x += noise.outlier_magnitude_px * angle.cos();
            obs.position.y += noise.outlier_magnitude_px * angle.sin();
        }
    }

    // Edges: perturb in centered polar space. Zero sigmas copy the exact
    // canonical coefficients rather than round-tripping through the polar
    // form.
    let perturb_edge = |line: &ImageLine, rng: &mut R| -> ImageLine {
        if noise.edge_angle_sigma_rad == 0.0 && noise.edge_offset_sigma_px == 0.0 {
            return *line;
        }
        let h = line_to_hough(line, &sample.camera);
        let theta = h.theta_c + noise.edge_angle_sigma_rad * gauss.sample(rng);
        let rho = h.rho_c + noise.edge_offset_sigma_px * gauss.sample(rng);
        hough_to_line(&HoughLine::new(theta, rho), &sample.camera)
    };
    let e1 = perturb_edge(&sample.edges_gt.0, rng);
    let e2 = perturb_edge(&sample.edges_gt.1, rng);

    FrameObservation::new([e1, e2], keypoints).expect("outer-roll is never dropped")
}

/// Labels self-check used by dataset generation and tests: the sample's
/// own annotations must be mutually consistent.
pub fn verify_sample(sample: &SceneSample, chain: &KinematicChain) -> Result<(), SynthError> {
    let shaft = sample.shaft(chain);
    let (e1, e2) = project_cylinder_edges(&shaft, &sample.camera)?;
    let close = |a: &ImageLine, b: &ImageLine| {
        (a.a() - b.a()).abs() < 1e-9 && (a.b() - b.b()).abs() < 1e-9 && (a.c() - b.c()).abs() < 1e-9
    };
    let pairs_match = (close(&e1, &sample.edges_gt.0) && close(&e2, &sample.edges_gt.1))
        || (close(&e1, &sample.edges_gt.1) && close(&e2, &sample.edges_gt.0));
    if !pairs_match {
        return Err(SynthError::Schema("edge labels inconsistent".into()));
    }
    let fk = forward_kinematics(chain, &sample.q)?;
    for (id, x) in &fk.keypoints {
        let px = project_point(&sample.camera, &sample.pose_gt.transform_point(x))?;
        let gt = sample.keypoints_gt[id];
        if (px - gt).norm() > 1e-9 {
            return Err(SynthError::Schema(format!(
                "keypoint {id} label inconsistent: {px} vs {gt}"
            )));
        }
    }
    Ok(())
}

fn random_unit<R: Rng>(rng: &mut R) -> UnitVec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return UnitVec3::new_unchecked(v / n);
        }
    }
}
