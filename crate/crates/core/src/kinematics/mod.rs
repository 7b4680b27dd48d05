//! Configurable forward kinematics for the distal sub-chain, producing
//! wrist keypoint positions in the end-effector frame.
//!
//! The end-effector frame sits at the end of the insertion shaft: its
//! z-axis is the shaft centerline and its origin is the outer-roll point,
//! so `forward_kinematics` always places the outer-roll keypoint at the
//! origin. Proximal joints before the shaft end are not modeled; their
//! errors are absorbed by the solved pose.

mod config;

pub use config::{ChainConfig, JointConfig, JointTypeConfig, KeypointConfig, OriginConfig};

use std::collections::BTreeMap;

use nalgebra::UnitQuaternion;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{unit_vec3, Point3, Real, RigidPose, UnitVec3, Vec3};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum KinematicsError {
    #[error("kinematic config parse error: {0}")]
    Parse(String),
    #[error("invalid kinematic config, {entity}: {reason}")]
    Semantic { entity: String, reason: String },
    #[error("joint state has {got} values, chain has {expected} joints")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
}

/// The four tracked keypoint roles.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum KeypointId {
    OuterRoll,
    WristYaw,
    TipA,
    TipB,
}

impl KeypointId {
    pub const ALL: [KeypointId; 4] = [
        KeypointId::OuterRoll,
        KeypointId::WristYaw,
        KeypointId::TipA,
        KeypointId::TipB,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            KeypointId::OuterRoll => "outer_roll",
            KeypointId::WristYaw => "wrist_yaw",
            KeypointId::TipA => "tip_a",
            KeypointId::TipB => "tip_b",
        }
    }
}

impl std::fmt::Display for KeypointId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointType {
    Revolute,
    Prismatic,
}

#[derive(Debug, Clone)]
struct Joint {
    name: String,
    joint_type: JointType,
    /// Index of the parent joint; `None` means the chain base.
    parent: Option<usize>,
    origin: RigidPose,
    axis: UnitVec3,
    limits: Option<[Real; 2]>,
    gripper: bool,
}

#[derive(Debug, Clone)]
struct Attachment {
    id: KeypointId,
    /// Frame the keypoint rides on; `None` means the chain base.
    frame: Option<usize>,
    offset: Vec3,
}

/// A validated kinematic chain. Immutable after load; FK is pure.
#[derive(Debug, Clone)]
pub struct KinematicChain {
    joints: Vec<Joint>,
    attachments: Vec<Attachment>,
    shaft_radius: Real,
    config: ChainConfig,
}

/// Joint values, radians for revolute and meters for prismatic joints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointState(pub Vec<Real>);

impl JointState {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }
}

/// FK output: keypoint positions in the end-effector frame plus any joint
/// limit warnings (limit violations do not abort).
#[derive(Debug, Clone)]
pub struct FkResult {
    pub keypoints: BTreeMap<KeypointId, Point3>,
    pub limit_warnings: Vec<String>,
}

impl KinematicChain {
    pub fn from_config(config: ChainConfig) -> Result<Self, KinematicsError> {
        let semantic = |entity: &str, reason: String| KinematicsError::Semantic {
            entity: entity.to_string(),
            reason,
        };
        if !(config.shaft_radius > 0.0) {
            return Err(semantic(
                "shaft_radius",
                format!("must be positive, got {}", config.shaft_radius),
            ));
        }
        if config.joints.is_empty() {
            return Err(semantic("joints", "at least one joint required".into()));
        }

        let mut joints = Vec::with_capacity(config.joints.len());
        for (i, jc) in config.joints.iter().enumerate() {
            let entity = format!("joints[{}] ({:?})", i, jc.name);
            if config.joints[..i].iter().any(|prev| prev.name == jc.name) {
                return Err(semantic(&entity, "duplicate joint name".into()));
            }
            let parent = match jc.parent.as_deref() {
                None => i.checked_sub(1),
                Some("base") => None,
                Some(name) => Some(
                    config.joints[..i]
                        .iter()
                        .position(|prev| prev.name == name)
                        .ok_or_else(|| {
                            semantic(
                                &entity,
                                format!("parent {name:?} is not a previously declared joint"),
                            )
                        })?,
                ),
            };
            let axis = unit_vec3(Vec3::from(jc.axis))
                .map_err(|_| semantic(&entity, "axis must be a nonzero vector".into()))?;
            if let Some([lo, hi]) = jc.limits {
                if !(lo <= hi) {
                    return Err(semantic(&entity, format!("limits [{lo}, {hi}] not ordered")));
                }
            }
            let [roll, pitch, yaw] = jc.origin.rpy;
            joints.push(Joint {
                name: jc.name.clone(),
                joint_type: match jc.joint_type {
                    JointTypeConfig::Revolute => JointType::Revolute,
                    JointTypeConfig::Prismatic => JointType::Prismatic,
                },
                parent,
                origin: RigidPose::new(
                    UnitQuaternion::from_euler_angles(roll, pitch, yaw),
                    Vec3::from(jc.origin.xyz),
                ),
                axis,
                limits: jc.limits,
                gripper: jc.gripper,
            });
        }

        let mut attachments = Vec::with_capacity(config.keypoints.len());
        for (i, kc) in config.keypoints.iter().enumerate() {
            let entity = format!("keypoints[{}] ({})", i, kc.id);
            if attachments.iter().any(|a: &Attachment| a.id == kc.id) {
                return Err(semantic(&entity, "duplicate keypoint id".into()));
            }
            let frame = if kc.frame == "base" {
                None
            } else {
                Some(
                    joints
                        .iter()
                        .position(|j| j.name == kc.frame)
                        .ok_or_else(|| {
                            semantic(&entity, format!("frame {:?} is not a joint name", kc.frame))
                        })?,
                )
            };
            let offset = Vec3::from(kc.offset);
            if kc.id == KeypointId::OuterRoll {
                if frame.is_some() {
                    return Err(semantic(
                        &entity,
                        "outer_roll must attach to the base frame (the shaft segment)".into(),
                    ));
                }
                if offset.x != 0.0 || offset.y != 0.0 {
                    return Err(semantic(
                        &entity,
                        "outer_roll offset must lie on the shaft centerline (x = y = 0)".into(),
                    ));
                }
            }
            attachments.push(Attachment {
                id: kc.id,
                frame,
                offset,
            });
        }
        for id in KeypointId::ALL {
            if !attachments.iter().any(|a| a.id == id) {
                return Err(semantic("keypoints", format!("missing keypoint role {id}")));
            }
        }

        Ok(Self {
            joints,
            attachments,
            shaft_radius: config.shaft_radius,
            config,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self, KinematicsError> {
        Self::from_config(ChainConfig::from_toml_str(text)?)
    }

    pub fn from_toml_file(path: &std::path::Path) -> Result<Self, KinematicsError> {
        Self::from_config(ChainConfig::from_toml_file(path)?)
    }

    pub fn num_joints(&self) -> usize {
        self.joints.len()
    }

    pub fn shaft_radius(&self) -> Real {
        self.shaft_radius
    }

    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    /// Per-joint sampling ranges: joint limits, or the gripper range for
    /// gripper-flagged joints, or a default +-pi/2 when unlimited.
    pub fn sampling_ranges(&self, gripper_range: [Real; 2]) -> Vec<[Real; 2]> {
        self.joints
            .iter()
            .map(|j| {
                if j.gripper {
                    gripper_range
                } else {
                    j.limits.unwrap_or([-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2])
                }
            })
            .collect()
    }

    pub fn is_gripper_joint(&self, index: usize) -> bool {
        self.joints[index].gripper
    }
}

fn joint_motion(joint: &Joint, q: Real) -> RigidPose {
    match joint.joint_type {
        JointType::Revolute => RigidPose::new(
            UnitQuaternion::from_axis_angle(&joint.axis, q),
            Vec3::zeros(),
        ),
        JointType::Prismatic => {
            RigidPose::new(UnitQuaternion::identity(), joint.axis.into_inner() * q)
        }
    }
}

/// Raw keypoint positions in the frame that `base` maps the chain root
/// into, without the end-effector re-centering. Exposes the bare frame
/// composition; most callers want [`forward_kinematics`].
pub fn raw_keypoints(
    chain: &KinematicChain,
    q: &JointState,
    base: &RigidPose,
) -> Result<FkResult, KinematicsError> {
    if q.0.len() != chain.joints.len() {
        return Err(KinematicsError::DimensionMismatch {
            expected: chain.joints.len(),
            got: q.0.len(),
        });
    }
    let mut limit_warnings = Vec::new();
    let mut frames: Vec<RigidPose> = Vec::with_capacity(chain.joints.len());
    for (i, joint) in chain.joints.iter().enumerate() {
        if let Some([lo, hi]) = joint.limits {
            if q.0[i] < lo || q.0[i] > hi {
                limit_warnings.push(format!(
                    "joint {} value {} outside limits [{}, {}]",
                    joint.name, q.0[i], lo, hi
                ));
            }
        }
        let parent_frame = match joint.parent {
            None => *base,
            Some(p) => frames[p],
        };
        frames.push(
            parent_frame
                .compose(&joint.origin)
                .compose(&joint_motion(joint, q.0[i])),
        );
    }
    let keypoints = chain
        .attachments
        .iter()
        .map(|att| {
            let frame = match att.frame {
                None => base,
                Some(j) => &frames[j],
            };
            (att.id, frame.transform_point(&Point3::from(att.offset)))
        })
        .collect();
    Ok(FkResult {
        keypoints,
        limit_warnings,
    })
}

/// Keypoint positions in the end-effector frame (origin at the outer-roll
/// point, z-axis along the shaft centerline). The outer-roll keypoint is
/// exactly the origin for every joint state.
pub fn forward_kinematics(
    chain: &KinematicChain,
    q: &JointState,
) -> Result<FkResult, KinematicsError> {
    let mut result = raw_keypoints(chain, q, &RigidPose::identity())?;
    let origin = result.keypoints[&KeypointId::OuterRoll].coords;
    for p in result.keypoints.values_mut() {
        *p = Point3::from(p.coords - origin);
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::FRAC_PI_2;

    use crate::testutil::{example_chain, EXAMPLE_TOML};

    #[test]
    fn outer_roll_is_origin_for_any_joint_state() {
        let chain = example_chain();
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..50 {
            let q = JointState(
                (0..chain.num_joints())
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect(),
            );
            let fk = forward_kinematics(&chain, &q).unwrap();
            assert_eq!(fk.keypoints[&KeypointId::OuterRoll], Point3::origin());
        }
    }

    #[test]
    fn zero_state_composes_home_offsets() {
        let chain = example_chain();
        let fk = forward_kinematics(&chain, &JointState::zeros(4)).unwrap();
        let wrist = fk.keypoints[&KeypointId::WristYaw];
        assert_relative_eq!(wrist.z, 0.0105, epsilon = 1e-12);
        assert_relative_eq!(wrist.x, 0.0, epsilon = 1e-12);
        let tip = fk.keypoints[&KeypointId::TipA];
        assert_relative_eq!(tip.z, 0.017, epsilon = 1e-12);
    }

    #[test]
    fn single_wrist_joint_elementary_rotation() {
        let toml = r#"
shaft_radius = 0.004
[[joints]]
name = "wrist"
type = "revolute"
axis = [1.0, 0.0, 0.0]
[[keypoints]]
id = "outer_roll"
frame = "base"
offset = [0.0, 0.0, 0.0]
[[keypoints]]
id = "wrist_yaw"
frame = "wrist"
offset = [0.0, 0.0, 0.0]
[[keypoints]]
id = "tip_a"
frame = "wrist"
offset = [0.0, 0.0, 0.02]
[[keypoints]]
id = "tip_b"
frame = "wrist"
offset = [0.0, 0.0, 0.02]
"#;
        let chain = KinematicChain::from_toml_str(toml).unwrap();
        let fk = forward_kinematics(&chain, &JointState(vec![FRAC_PI_2])).unwrap();
        let tip = fk.keypoints[&KeypointId::TipA];
        // Rotation by pi/2 about x maps (0, 0, L) to (0, -L, 0).
        assert_relative_eq!(tip.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(tip.y, -0.02, epsilon = 1e-12);
        assert_relative_eq!(tip.z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn base_rotation_equivariance() {
        let chain = example_chain();
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..20 {
            let q = JointState(
                (0..chain.num_joints())
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect(),
            );
            let rot = RigidPose::new(
                UnitQuaternion::from_euler_angles(
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-3.0..3.0),
                ),
                Vec3::zeros(),
            );
            let ident = raw_keypoints(&chain, &q, &RigidPose::identity()).unwrap();
            let rotated = raw_keypoints(&chain, &q, &rot).unwrap();
            for id in KeypointId::ALL {
                let expected = rot.transform_point(&ident.keypoints[&id]);
                let got = rotated.keypoints[&id];
                assert!((expected.coords - got.coords).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn same_link_distances_are_q_invariant() {
        // Both tips on the same rigid link with different offsets.
        let toml = r#"
shaft_radius = 0.004
[[joints]]
name = "wrist"
type = "revolute"
axis = [0.0, 1.0, 0.0]
[[keypoints]]
id = "outer_roll"
frame = "base"
offset = [0.0, 0.0, 0.0]
[[keypoints]]
id = "wrist_yaw"
frame = "wrist"
offset = [0.0, 0.0, 0.0]
[[keypoints]]
id = "tip_a"
frame = "wrist"
offset = [0.003, 0.0, 0.012]
[[keypoints]]
id = "tip_b"
frame = "wrist"
offset = [-0.003, 0.0, 0.012]
"#;
        let chain = KinematicChain::from_toml_str(toml).unwrap();
        let mut rng = StdRng::seed_from_u64(13);
        let d0 = {
            let fk = forward_kinematics(&chain, &JointState(vec![0.0])).unwrap();
            (fk.keypoints[&KeypointId::TipA] - fk.keypoints[&KeypointId::TipB]).norm()
        };
        for _ in 0..30 {
            let q = JointState(vec![rng.random_range(-2.0..2.0)]);
            let fk = forward_kinematics(&chain, &q).unwrap();
            let d = (fk.keypoints[&KeypointId::TipA] - fk.keypoints[&KeypointId::TipB]).norm();
            assert_relative_eq!(d, d0, epsilon = 1e-14);
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let chain = example_chain();
        let err = forward_kinematics(&chain, &JointState(vec![0.0])).unwrap_err();
        assert!(matches!(
            err,
            KinematicsError::DimensionMismatch { expected: 4, got: 1 }
        ));
    }

    #[test]
    fn limit_violation_warns_but_does_not_abort() {
        let chain = example_chain();
        let fk = forward_kinematics(&chain, &JointState(vec![5.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(fk.limit_warnings.len(), 1);
        assert!(fk.limit_warnings[0].contains("wrist_pitch"));
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let no_joint = "shaft_radius = 0.004\njoints = []\nkeypoints = []\n";
        assert!(matches!(
            KinematicChain::from_toml_str(no_joint),
            Err(KinematicsError::Semantic { .. })
        ));

        let off_axis_outer_roll = EXAMPLE_TOML.replace(
            "id = \"outer_roll\"\nframe = \"base\"\noffset = [0.0, 0.0, 0.0]",
            "id = \"outer_roll\"\nframe = \"base\"\noffset = [0.001, 0.0, 0.0]",
        );
        let err = KinematicChain::from_toml_str(&off_axis_outer_roll).unwrap_err();
        assert!(err.to_string().contains("centerline"));

        let unknown_key = format!("{EXAMPLE_TOML}\nbogus = 1\n");
        assert!(matches!(
            KinematicChain::from_toml_str(&unknown_key),
            Err(KinematicsError::Parse(_))
        ));
    }
}
