//! Feature-to-pose inference: decode a frame observation, reconstruct the
//! shaft axis, recover the initial position and rotation, then solve the
//! bounded two-parameter robust reprojection problem for the shaft roll
//! and the axial slide, composing the camera-to-end-effector transform.

mod optim;
mod residual;

pub use optim::numeric_jacobian;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cylinder::{
    invert_cylinder_pixel_lines, ray_centerline_intersection, CylinderError, RecoveredAxis,
};
use crate::geometry::{
    CameraModel, GeometryError, ImageLine, Point2, Point3, Real, RigidPose, UnitVec3, Vec3,
};
use crate::kinematics::{forward_kinematics, KeypointId, KinematicChain, KinematicsError};
use crate::solver::residual::ReprojectionModel;

#[derive(Debug, Clone, Error)]
pub enum SolveError {
    #[error("no wrist or tip keypoint observed; shaft roll is unidentifiable")]
    NotObservable,
    #[error("outer-roll keypoint is required")]
    MissingOuterRoll,
    #[error("keypoint confidence {0} outside [0, 1]")]
    BadConfidence(Real),
    #[error("a transformed keypoint lies behind the camera")]
    BehindCamera,
    #[error("invalid solver config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Cylinder(#[from] CylinderError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A single observed keypoint with detector confidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeypointObservation {
    pub position: Point2,
    pub confidence: Real,
}

impl KeypointObservation {
    pub fn certain(position: Point2) -> Self {
        Self {
            position,
            confidence: 1.0,
        }
    }
}

/// Detected features for one frame: the two shaft edges plus up to four
/// keypoints. The outer-roll keypoint is mandatory (it anchors the
/// position recovery); tips are unordered.
#[derive(Debug, Clone)]
pub struct FrameObservation {
    edges: [ImageLine; 2],
    edge_confidence: [Real; 2],
    keypoints: BTreeMap<KeypointId, KeypointObservation>,
}

impl FrameObservation {
    pub fn new(
        edges: [ImageLine; 2],
        keypoints: BTreeMap<KeypointId, KeypointObservation>,
    ) -> Result<Self, SolveError> {
        if !keypoints.contains_key(&KeypointId::OuterRoll) {
            return Err(SolveError::MissingOuterRoll);
        }
        for obs in keypoints.values() {
            if !(0.0..=1.0).contains(&obs.confidence) {
                return Err(SolveError::BadConfidence(obs.confidence));
            }
        }
        Ok(Self {
            edges,
            edge_confidence: [1.0, 1.0],
            keypoints,
        })
    }

    pub fn with_edge_confidence(mut self, confidence: [Real; 2]) -> Self {
        self.edge_confidence = confidence;
        self
    }

    /// Replaces both edges, e.g. after pixel-level refinement.
    pub fn set_edges(&mut self, edges: [ImageLine; 2]) {
        self.edges = edges;
    }

    pub fn edges(&self) -> &[ImageLine; 2] {
        &self.edges
    }

    pub fn edge_confidence(&self) -> &[Real; 2] {
        &self.edge_confidence
    }

    pub fn keypoints(&self) -> &BTreeMap<KeypointId, KeypointObservation> {
        &self.keypoints
    }

    pub fn keypoint(&self, id: KeypointId) -> Option<Point2> {
        self.keypoints.get(&id).map(|k| k.position)
    }

    pub fn outer_roll(&self) -> Point2 {
        self.keypoints[&KeypointId::OuterRoll].position
    }

    /// True when at least one wrist or tip keypoint is present, making the
    /// shaft roll observable.
    pub fn roll_observable(&self) -> bool {
        [KeypointId::WristYaw, KeypointId::TipA, KeypointId::TipB]
            .iter()
            .any(|id| self.keypoints.contains_key(id))
    }
}

/// Robust loss applied to the reprojection residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossModel {
    #[default]
    Cauchy,
    Square,
}

/// Loss with its scale resolved, as consumed by the optimizer.
#[derive(Debug, Clone, Copy)]
pub enum LossKind {
    Cauchy { scale: Real },
    Square,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Bounds on the shaft roll (radians).
    pub gamma_bounds: [Real; 2],
    /// Bounds on the axial slide (meters).
    pub k_bounds: [Real; 2],
    /// Regularization weight penalizing keypoint drift (pixels per meter).
    pub lambda_k: Real,
    /// Number of evenly spaced roll starts.
    pub multistart_count: usize,
    pub max_iterations: usize,
    pub function_tolerance: Real,
    /// Cauchy loss scale (pixels).
    pub cauchy_scale: Real,
    pub loss: LossModel,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gamma_bounds: [-PI, PI],
            k_bounds: [-0.015, 0.015],
            lambda_k: 100.0,
            multistart_count: 8,
            max_iterations: 100,
            function_tolerance: 1e-12,
            cauchy_scale: 5.0,
            loss: LossModel::Cauchy,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let err = |m: String| Err(SolveError::InvalidConfig(m));
        if !(self.gamma_bounds[0] < self.gamma_bounds[1]) {
            return err(format!("gamma bounds {:?} not ordered", self.gamma_bounds));
        }
        if !(self.k_bounds[0] < self.k_bounds[1]) {
            return err(format!("k bounds {:?} not ordered", self.k_bounds));
        }
        if self.multistart_count < 1 {
            return err("multistart_count must be >= 1".into());
        }
        if !(self.lambda_k >= 0.0) {
            return err(format!("lambda_k must be >= 0, got {}", self.lambda_k));
        }
        if !(self.cauchy_scale > 0.0) {
            return err(format!("cauchy_scale must be > 0, got {}", self.cauchy_scale));
        }
        Ok(())
    }

    fn loss_kind(&self) -> LossKind {
        match self.loss {
            LossModel::Cauchy => LossKind::Cauchy {
                scale: self.cauchy_scale,
            },
            LossModel::Square => LossKind::Square,
        }
    }
}

/// Solved pose with diagnostics.
#[derive(Debug, Clone)]
pub struct PoseSolution {
    /// Camera-to-end-effector transform: `x_cam = R x_ee + t`.
    pub pose: RigidPose,
    pub gamma_star: Real,
    pub k_star: Real,
    /// Final robust cost.
    pub residual_norm: Real,
    /// Pixel residual per observed keypoint at the optimum.
    pub per_keypoint_residuals: BTreeMap<KeypointId, Real>,
    pub converged: bool,
}

/// Robust Cauchy cost `sum (s^2/2) ln(1 + (r_i/s)^2)` of a residual vector.
pub fn cauchy_cost(residuals: &[Real], scale: Real) -> Real {
    let s2 = scale * scale;
    residuals
        .iter()
        .map(|r| {
            let x = r / scale;
            (s2 / 2.0) * x.mul_add(x, 1.0).ln()
        })
        .sum()
}

/// Residual evaluation context for one frame and one axis-direction branch.
///
/// The tip association is re-derived at every evaluation; the Jacobian is
/// analytic and consistent with the rows it is returned with.
pub struct ResidualContext {
    model: ReprojectionModel,
}

impl ResidualContext {
    pub fn new(
        axis: &RecoveredAxis,
        p0: &Point3,
        fk_points: &BTreeMap<KeypointId, Point3>,
        obs: &FrameObservation,
        camera: &CameraModel,
        cfg: &SolverConfig,
    ) -> Self {
        Self::with_direction(&axis.d, p0, fk_points, obs, camera, cfg)
    }

    /// Same as [`ResidualContext::new`] but with an explicit direction,
    /// used to evaluate the mirrored axis-sign branch.
    pub fn with_direction(
        direction: &UnitVec3,
        p0: &Point3,
        fk_points: &BTreeMap<KeypointId, Point3>,
        obs: &FrameObservation,
        camera: &CameraModel,
        cfg: &SolverConfig,
    ) -> Self {
        let model = ReprojectionModel::new(
            camera,
            crate::cylinder::align_rotation(direction),
            p0.coords,
            direction.into_inner(),
            cfg.lambda_k,
            fk_points,
            obs.keypoints.iter().map(|(id, k)| (*id, k.position)),
        );
        Self { model }
    }

    /// Residual rows at (gamma, k).
    pub fn residual(&self, gamma: Real, k: Real) -> Result<Vec<Real>, SolveError> {
        Ok(self
            .model
            .evaluate(gamma, k)
            .ok_or(SolveError::BehindCamera)?
            .rows)
    }

    /// Residual rows and the analytic Jacobian (one `[d/dgamma, d/dk]` pair
    /// per row).
    pub fn residual_and_jacobian(
        &self,
        gamma: Real,
        k: Real,
    ) -> Result<(Vec<Real>, Vec<[Real; 2]>), SolveError> {
        let eval = self.model.evaluate(gamma, k).ok_or(SolveError::BehindCamera)?;
        Ok((eval.rows, eval.jacobian))
    }
}

/// Reprojection residual vector at (gamma, k): one (u, v) row pair per
/// observed wrist/tip keypoint (tips under the cost-minimizing
/// association) followed by the slide regularizer row `lambda_k * k`.
pub fn reprojection_residual(
    gamma: Real,
    k: Real,
    axis: &RecoveredAxis,
    p0: &Point3,
    fk_points: &BTreeMap<KeypointId, Point3>,
    obs: &FrameObservation,
    camera: &CameraModel,
    cfg: &SolverConfig,
) -> Result<Vec<Real>, SolveError> {
    ResidualContext::new(axis, p0, fk_points, obs, camera, cfg).residual(gamma, k)
}

/// Runs the full feature-to-pose inference for one frame.
///
/// Inverts the cylinder from the two edges, intersects the outer-roll ray
/// with the recovered centerline, then minimizes the robust reprojection
/// cost over (gamma, k) with multistart on gamma. Both signs of the
/// recovered axis direction are evaluated and the lower-cost branch wins,
/// which resolves the inversion's intrinsic sign ambiguity against the
/// keypoint evidence. Deterministic for fixed inputs and config.
pub fn solve_pose(
    obs: &FrameObservation,
    q: &crate::kinematics::JointState,
    chain: &KinematicChain,
    camera: &CameraModel,
    cfg: &SolverConfig,
) -> Result<PoseSolution, SolveError> {
    cfg.validate()?;
    if !obs.roll_observable() {
        return Err(SolveError::NotObservable);
    }
    let fk = forward_kinematics(chain, q)?;
    let u0 = obs.outer_roll();
    let axis = invert_cylinder_pixel_lines(
        &obs.edges[0],
        &obs.edges[1],
        chain.shaft_radius(),
        camera,
        &u0,
    )?;
    let p0 = ray_centerline_intersection(camera, &axis, &u0)?;

    let bounds = optim::Box2 {
        lo: [cfg.gamma_bounds[0], cfg.k_bounds[0]],
        hi: [cfg.gamma_bounds[1], cfg.k_bounds[1]],
    };
    let loss = cfg.loss_kind();
    let mut best: Option<(optim::Outcome, ResidualContext)> = None;
    for direction in [axis.d, UnitVec3::new_unchecked(-axis.d.into_inner())] {
        let ctx = ResidualContext::with_direction(
            &direction,
            &p0,
            &fk.keypoints,
            obs,
            camera,
            cfg,
        );
        for i in 0..cfg.multistart_count {
            let gamma0 = cfg.gamma_bounds[0]
                + (cfg.gamma_bounds[1] - cfg.gamma_bounds[0]) * i as Real
                    / cfg.multistart_count as Real;
            let outcome = optim::minimize(
                |g, k| {
                    ctx.model
                        .evaluate(g, k)
                        .map(|e| (e.rows, e.jacobian))
                },
                [gamma0, 0.0],
                bounds,
                loss,
                cfg.max_iterations,
                cfg.function_tolerance,
            );
            if best.as_ref().is_none_or(|(b, _)| outcome.cost < b.cost) {
                let ctx_copy = ResidualContext {
                    model: ctx.model.clone(),
                };
                best = Some((outcome, ctx_copy));
            }
        }
    }
    let (outcome, ctx) = best.expect("multistart_count >= 1");

    let per_keypoint_residuals = ctx
        .model
        .evaluate(outcome.x[0], outcome.x[1])
        .map(|e| e.per_keypoint.into_iter().collect())
        .unwrap_or_default();

    let (s, c) = outcome.x[0].sin_cos();
    let rz = nalgebra::Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
    let rotation = ctx.model.r_align * rz;
    let translation: Vec3 = ctx.model.p0 + outcome.x[1] * ctx.model.d;
    let pose = RigidPose::from_matrix(&rotation, translation)
        .expect("composition of rotations is a rotation");

    Ok(PoseSolution {
        pose,
        gamma_star: outcome.x[0],
        k_star: outcome.x[1],
        residual_norm: outcome.cost,
        per_keypoint_residuals,
        converged: outcome.converged && outcome.cost.is_finite(),
    })
}
