//! Cylinder-constrained 6-DOF pose estimation for long-shaft instruments.
//!
//! The library covers the full geometric pipeline for localizing an
//! instrument whose most prominent visual feature is a cylindrical shaft:
//!
//! 1. **Forward labeling** — project a 3D shaft to its two silhouette edge
//!    lines and project wrist keypoints through a pinhole camera
//!    ([`cylinder::project_cylinder_edges`], [`geometry::project_point`]).
//! 2. **Inverse reconstruction** — recover the shaft axis in closed form
//!    from the two projected edges and the known radius
//!    ([`cylinder::invert_cylinder`]).
//! 3. **Pose solving** — resolve the remaining roll/slide ambiguity with a
//!    bounded two-parameter robust reprojection solver
//!    ([`solver::solve_pose`]).
//! 4. **Edge refinement** — snap coarse line hypotheses to pixel-level
//!    edge evidence via inlier gating and RANSAC ([`refine::refine_line`]).
//! 5. **Synthetic oracle** — a deterministic scene generator with exact
//!    projective labels and a parametric detector-noise model
//!    ([`synth::generate_dataset`]).
//! 6. **Evaluation** — keypoint localization error, edge-agreement score,
//!    and remote-center-of-motion convergence ([`metrics`]).
//!
//! All operations are pure functions of immutable inputs and are safe to
//! run concurrently per frame.

pub mod cylinder;
pub mod geometry;
#[cfg(test)]
pub(crate) mod testutil;
pub mod jsonio;
pub mod kinematics;
pub mod metrics;
pub mod raster;
pub mod refine;
pub mod solver;
pub mod synth;

pub use geometry::{CameraModel, GeometryError, HoughLine, ImageLine, RigidPose};
pub use kinematics::{JointState, KeypointId, KinematicChain};
pub use solver::{FrameObservation, PoseSolution, SolverConfig};
