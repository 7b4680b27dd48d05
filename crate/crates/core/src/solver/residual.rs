//! Reprojection residual for the roll/slide parameters, with the analytic
//! Jacobian and the cost-minimizing tip association.

use nalgebra::Matrix3;

use crate::geometry::{Point2, Point3, Real, Vec3, MIN_DEPTH};
use crate::kinematics::KeypointId;

/// One keypoint target: FK position in the end-effector frame plus the
/// observed pixel.
#[derive(Debug, Clone, Copy)]
struct Target {
    fk: Vec3,
    observed: Point2,
    id: KeypointId,
}

/// Frozen per-frame data for residual evaluation. The pose parameters
/// enter as `R = r_align * Rz(gamma)`, `t = p0 + k * d`.
#[derive(Debug, Clone)]
pub(super) struct ReprojectionModel {
    fx: Real,
    fy: Real,
    pub(super) r_align: Matrix3<Real>,
    pub(super) p0: Vec3,
    pub(super) d: Vec3,
    lambda_k: Real,
    /// Targets with fixed identity (wrist yaw).
    fixed: Vec<Target>,
    /// Observed tip pixels, association chosen per evaluation.
    tip_obs: Vec<Point2>,
    /// FK positions of the two tips.
    tip_fk: [(KeypointId, Vec3); 2],
}

#[derive(Debug, Clone)]
pub(super) struct Evaluation {
    pub rows: Vec<Real>,
    pub jacobian: Vec<[Real; 2]>,
    /// Pixel residual norm per keypoint, tips under their assigned FK id.
    pub per_keypoint: Vec<(KeypointId, Real)>,
}

impl ReprojectionModel {
    pub fn new(
        camera: &crate::geometry::CameraModel,
        r_align: Matrix3<Real>,
        p0: Vec3,
        d: Vec3,
        lambda_k: Real,
        fk_points: &std::collections::BTreeMap<KeypointId, Point3>,
        observed: impl Iterator<Item = (KeypointId, Point2)>,
    ) -> Self {
        let mut fixed = Vec::new();
        let mut tip_obs = Vec::new();
        for (id, px) in observed {
            match id {
                KeypointId::OuterRoll => {} // defines p0, never re-enters the residual
                KeypointId::WristYaw => {
                    if let Some(p) = fk_points.get(&id) {
                        fixed.push(Target {
                            fk: p.coords,
                            observed: px,
                            id,
                        });
                    }
                }
                KeypointId::TipA | KeypointId::TipB => tip_obs.push(px),
            }
        }
        let tip_fk = [
            (
                KeypointId::TipA,
                fk_points
                    .get(&KeypointId::TipA)
                    .map_or(Vec3::zeros(), |p| p.coords),
            ),
            (
                KeypointId::TipB,
                fk_points
                    .get(&KeypointId::TipB)
                    .map_or(Vec3::zeros(), |p| p.coords),
            ),
        ];
        Self {
            fx: camera.fx,
            fy: camera.fy,
            r_align,
            p0,
            d,
            lambda_k,
            fixed,
            tip_obs,
            tip_fk,
        }
    }

    pub fn num_observed_keypoints(&self) -> usize {
        self.fixed.len() + self.tip_obs.len()
    }

    /// Transformed camera-frame point and its derivative pieces, or `None`
    /// if behind the camera.
    fn project(
        &self,
        x: &Vec3,
        rot: &Matrix3<Real>,
        dy_dgamma_mat: &Matrix3<Real>,
        t: &Vec3,
    ) -> Option<([Real; 2], [[Real; 2]; 2])> {
        let y = rot * x + t;
        if y.z <= MIN_DEPTH {
            return None;
        }
        let u = [self.fx * y.x / y.z, self.fy * y.y / y.z];
        let dy_dgamma = dy_dgamma_mat * x;
        let dy_dk = self.d;
        let zi = 1.0 / y.z;
        // d(u)/d(y) rows: [fx/z, 0, -fx x/z^2] and [0, fy/z, -fy y/z^2].
        let du_dy = [
            [self.fx * zi, 0.0, -self.fx * y.x * zi * zi],
            [0.0, self.fy * zi, -self.fy * y.y * zi * zi],
        ];
        let mut jac = [[0.0; 2]; 2];
        for (row, du) in jac.iter_mut().zip(du_dy.iter()) {
            row[0] = du[0] * dy_dgamma.x + du[1] * dy_dgamma.y + du[2] * dy_dgamma.z;
            row[1] = du[0] * dy_dk.x + du[1] * dy_dk.y + du[2] * dy_dk.z;
        }
        Some((u, jac))
    }

    /// Evaluates residual rows and the analytic Jacobian at (gamma, k).
    ///
    /// Rows: wrist-yaw (u, v) pairs first, then tip pairs in observation
    /// order under the cost-minimizing association, then the slide
    /// regularizer `lambda_k * k`. Returns `None` when a transformed
    /// keypoint falls behind the camera.
    pub fn evaluate(&self, gamma: Real, k: Real) -> Option<Evaluation> {
        let (s, c) = gamma.sin_cos();
        let rz = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
        let drz = Matrix3::new(-s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0);
        let rot = self.r_align * rz;
        let drot = self.r_align * drz;
        let t = self.p0 + k * self.d;

        let mut rows = Vec::with_capacity(2 * self.num_observed_keypoints() + 1);
        let mut jacobian = Vec::with_capacity(rows.capacity());
        let mut per_keypoint = Vec::new();

        let mut push_target = |target: &Target,
                               rows: &mut Vec<Real>,
                               jacobian: &mut Vec<[Real; 2]>,
                               per_keypoint: &mut Vec<(KeypointId, Real)>|
         -> Option<()> {
            let (u, jac) = self.project(&target.fk, &rot, &drot, &t)?;
            let ru = u[0] - target.observed.x;
            let rv = u[1] - target.observed.y;
            rows.push(ru);
            rows.push(rv);
            jacobian.push(jac[0]);
            jacobian.push(jac[1]);
            per_keypoint.push((target.id, (ru * ru + rv * rv).sqrt()));
            Some(())
        };

        for target in &self.fixed {
            push_target(target, &mut rows, &mut jacobian, &mut per_keypoint)?;
        }

        // Tip association: evaluate every injective assignment of observed
        // tip pixels to FK tips and take the lowest summed squared
        // residual. Two observed tips give two permutations; one gives two
        // single assignments.
        if !self.tip_obs.is_empty() {
            let candidates: &[&[usize]] = if self.tip_obs.len() == 2 {
                &[&[0, 1], &[1, 0]]
            } else {
                &[&[0], &[1]]
            };
            let mut best: Option<(Real, &[usize])> = None;
            for &assign in candidates {
                let mut total = 0.0;
                let mut feasible = true;
                for (obs_i, &fk_i) in assign.iter().enumerate() {
                    let target = Target {
                        fk: self.tip_fk[fk_i].1,
                        observed: self.tip_obs[obs_i],
                        id: self.tip_fk[fk_i].0,
                    };
                    match self.project(&target.fk, &rot, &drot, &t) {
                        Some((u, _)) => {
                            total += (u[0] - target.observed.x).powi(2)
                                + (u[1] - target.observed.y).powi(2);
                        }
                        None => {
                            feasible = false;
                            break;
                        }
                    }
                }
                if feasible && best.as_ref().is_none_or(|(b, _)| total < *b) {
                    best = Some((total, assign));
                }
            }
            let (_, assign) = best?;
            for (obs_i, &fk_i) in assign.iter().enumerate() {
                let target = Target {
                    fk: self.tip_fk[fk_i].1,
                    observed: self.tip_obs[obs_i],
                    id: self.tip_fk[fk_i].0,
                };
                push_target(&target, &mut rows, &mut jacobian, &mut per_keypoint)?;
            }
        }

        rows.push(self.lambda_k * k);
        jacobian.push([0.0, self.lambda_k]);
        Some(Evaluation {
            rows,
            jacobian,
            per_keypoint,
        })
    }
}
