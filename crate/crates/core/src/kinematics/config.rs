use serde::{Deserialize, Serialize};

use super::KinematicsError;

/// On-disk kinematic description. See `configs/example_tool.toml` for a
/// complete example; the geometry there is a placeholder for testing, not
/// any particular instrument.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    /// Insertion-shaft radius (meters).
    pub shaft_radius: f64,
    pub joints: Vec<JointConfig>,
    pub keypoints: Vec<KeypointConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointConfig {
    pub name: String,
    #[serde(rename = "type")]
    pub joint_type: JointTypeConfig,
    /// Parent frame: "base" or a previously declared joint name.
    /// Defaults to the previous joint in the list (base for the first).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    #[serde(default)]
    pub origin: OriginConfig,
    pub axis: [f64; 3],
    /// Lower and upper joint limits (radians or meters).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limits: Option<[f64; 2]>,
    /// Marks a gripper-jaw joint; the scene sampler draws these from the
    /// gripper-angle range instead of the joint limits.
    #[serde(default)]
    pub gripper: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointTypeConfig {
    Revolute,
    Prismatic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OriginConfig {
    /// Translation from the parent frame (meters).
    #[serde(default)]
    pub xyz: [f64; 3],
    /// Fixed rotation from the parent frame as roll-pitch-yaw (radians),
    /// applied as Rz(yaw) * Ry(pitch) * Rx(roll).
    #[serde(default)]
    pub rpy: [f64; 3],
}

impl Default for OriginConfig {
    fn default() -> Self {
        Self {
            xyz: [0.0; 3],
            rpy: [0.0; 3],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeypointConfig {
    pub id: super::KeypointId,
    /// Frame the keypoint is rigidly attached to: "base" or a joint name.
    pub frame: String,
    /// Offset in the attachment frame (meters).
    pub offset: [f64; 3],
}

impl ChainConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, KinematicsError> {
        toml::from_str(text).map_err(|e| KinematicsError::Parse(e.to_string()))
    }

    pub fn from_toml_file(path: &std::path::Path) -> Result<Self, KinematicsError> {
        let text = std::fs::read_to_string(path).map_err(|e| KinematicsError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }
}
