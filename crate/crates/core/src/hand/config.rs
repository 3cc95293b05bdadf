//! Text (TOML) hand description.

use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::{Capsule, FingerChain, HandError, HandModel, Joint, JointKind};
use crate::geometry::Pose;

pub const BUILTIN_HANDS: [&str; 2] = ["three_finger", "parallel_jaw"];

const THREE_FINGER: &str = include_str!("../../../../hands/three_finger.toml");
const PARALLEL_JAW: &str = include_str!("../../../../hands/parallel_jaw.toml");

const UNIT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HandFile {
    name: String,
    #[serde(default = "default_force")]
    max_force_per_contact: f64,
    open_pose: Vec<f64>,
    closed_pose: Vec<f64>,
    #[serde(default)]
    palm_offset: FrameFile,
    #[serde(default)]
    palm: Vec<CapsuleFile>,
    fingers: Vec<FingerFile>,
}

fn default_force() -> f64 {
    20.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameFile {
    #[serde(default)]
    position: [f64; 3],
    /// Quaternion `[x, y, z, w]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rotation: Option<[f64; 4]>,
    /// Rotation about the parent z-axis, degrees.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    yaw_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CapsuleFile {
    a: [f64; 3],
    b: [f64; 3],
    radius: f64,
    mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointFile {
    kind: JointKind,
    #[serde(default)]
    origin: [f64; 3],
    axis: [f64; 3],
    range: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FingerFile {
    base: FrameFile,
    joints: Vec<JointFile>,
    links: Vec<CapsuleFile>,
}

fn schema(msg: impl Into<String>) -> HandError {
    HandError::Schema(msg.into())
}

impl FrameFile {
    fn to_pose(&self, what: &str) -> Result<Pose, HandError> {
        let orientation = match (self.rotation, self.yaw_deg) {
            (Some(_), Some(_)) => return Err(schema(format!("{what}: give rotation or yaw_deg, not both"))),
            (Some([x, y, z, w]), None) => {
                let q = Quaternion::new(w, x, y, z);
                if (q.norm() - 1.0).abs() > UNIT_TOL {
                    return Err(schema(format!("{what}: rotation is not a unit quaternion")));
                }
                UnitQuaternion::new_unchecked(q)
            }
            (None, Some(deg)) => UnitQuaternion::from_axis_angle(&Vector3::z_axis(), deg.to_radians()),
            (None, None) => UnitQuaternion::identity(),
        };
        Ok(Pose::new(Vector3::from(self.position), orientation))
    }

    fn from_pose(p: &Pose) -> FrameFile {
        let q = p.orientation.quaternion();
        FrameFile {
            position: p.position.into(),
            rotation: Some([q.i, q.j, q.k, q.w]),
            yaw_deg: None,
        }
    }
}

impl CapsuleFile {
    fn to_capsule(&self, what: &str) -> Result<Capsule, HandError> {
        if !(self.radius > 0.0) {
            return Err(schema(format!("{what}: capsule radius must be positive")));
        }
        if !(self.mu >= 0.0) {
            return Err(schema(format!("{what}: friction must be nonnegative")));
        }
        Ok(Capsule {
            a: self.a.into(),
            b: self.b.into(),
            radius: self.radius,
            mu: self.mu,
        })
    }

    fn from_capsule(c: &Capsule) -> CapsuleFile {
        CapsuleFile {
            a: c.a.into(),
            b: c.b.into(),
            radius: c.radius,
            mu: c.mu,
        }
    }
}

/// Parses and validates a hand description.
pub fn load_hand(text: &str) -> Result<HandModel, HandError> {
    let file: HandFile = toml::from_str(text).map_err(|e| schema(e.to_string()))?;
    let mut fingers = Vec::with_capacity(file.fingers.len());
    for (i, f) in file.fingers.iter().enumerate() {
        if f.joints.is_empty() {
            return Err(schema(format!("finger {i} has no joints")));
        }
        if f.joints.len() != f.links.len() {
            return Err(schema(format!(
                "finger {i}: {} joints but {} links",
                f.joints.len(),
                f.links.len()
            )));
        }
        let mut joints = Vec::with_capacity(f.joints.len());
        for (j, jf) in f.joints.iter().enumerate() {
            let axis = Vector3::from(jf.axis);
            if (axis.norm() - 1.0).abs() > UNIT_TOL {
                return Err(schema(format!("finger {i} joint {j}: axis is not a unit vector")));
            }
            if !(jf.range[0] <= jf.range[1]) {
                return Err(schema(format!("finger {i} joint {j}: empty range")));
            }
            joints.push(Joint {
                kind: jf.kind,
                origin: jf.origin.into(),
                axis,
                range: (jf.range[0], jf.range[1]),
            });
        }
        let links = f
            .links
            .iter()
            .enumerate()
            .map(|(j, c)| c.to_capsule(&format!("finger {i} link {j}")))
            .collect::<Result<_, _>>()?;
        fingers.push(FingerChain {
            base: f.base.to_pose(&format!("finger {i} base"))?,
            joints,
            links,
        });
    }
    let joint_count: usize = fingers.iter().map(|f| f.joints.len()).sum();
    for (label, pose) in [("open_pose", &file.open_pose), ("closed_pose", &file.closed_pose)] {
        if pose.len() != joint_count {
            return Err(schema(format!("{label} has {} entries for {joint_count} joints", pose.len())));
        }
    }
    let mut k = 0;
    for f in &fingers {
        for j in &f.joints {
            for v in [file.open_pose[k], file.closed_pose[k]] {
                if v < j.range.0 || v > j.range.1 {
                    return Err(schema(format!("joint {k}: pose value {v} outside its range")));
                }
            }
            k += 1;
        }
    }
    if !(file.max_force_per_contact > 0.0) {
        return Err(schema("max_force_per_contact must be positive"));
    }
    let palm = file
        .palm
        .iter()
        .enumerate()
        .map(|(i, c)| c.to_capsule(&format!("palm capsule {i}")))
        .collect::<Result<_, _>>()?;
    Ok(HandModel {
        name: file.name,
        palm_offset: file.palm_offset.to_pose("palm_offset")?,
        palm,
        fingers,
        open_pose: file.open_pose,
        closed_pose: file.closed_pose,
        max_force_per_contact: file.max_force_per_contact,
    })
}

pub fn load_hand_file(path: &Path) -> Result<HandModel, HandError> {
    let text = std::fs::read_to_string(path).map_err(|e| schema(format!("{}: {e}", path.display())))?;
    load_hand(&text)
}

pub fn builtin_hand(name: &str) -> Result<HandModel, HandError> {
    match name {
        "three_finger" => load_hand(THREE_FINGER),
        "parallel_jaw" => load_hand(PARALLEL_JAW),
        other => Err(HandError::UnknownHand(other.to_string())),
    }
}

impl HandModel {
    /// Serializes to the text format accepted by [`load_hand`].
    pub fn to_toml(&self) -> String {
        let file = HandFile {
            name: self.name.clone(),
            max_force_per_contact: self.max_force_per_contact,
            open_pose: self.open_pose.clone(),
            closed_pose: self.closed_pose.clone(),
            palm_offset: FrameFile::from_pose(&self.palm_offset),
            palm: self.palm.iter().map(CapsuleFile::from_capsule).collect(),
            fingers: self
                .fingers
                .iter()
                .map(|f| FingerFile {
                    base: FrameFile::from_pose(&f.base),
                    joints: f
                        .joints
                        .iter()
                        .map(|j| JointFile {
                            kind: j.kind,
                            origin: j.origin.into(),
                            axis: j.axis.into(),
                            range: [j.range.0, j.range.1],
                        })
                        .collect(),
                    links: f.links.iter().map(CapsuleFile::from_capsule).collect(),
                })
                .collect(),
        };
        toml::to_string(&file).expect("hand model serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_jaw_has_two_single_joint_fingers() {
        let h = builtin_hand("parallel_jaw").unwrap();
        assert_eq!(h.fingers.len(), 2);
        assert!(h.fingers.iter().all(|f| f.joints.len() == 1));
        assert_eq!(h.max_force_per_contact, 20.0);
    }

    #[test]
    fn builtins_round_trip() {
        for name in BUILTIN_HANDS {
            let h = builtin_hand(name).unwrap();
            let again = load_hand(&h.to_toml()).unwrap();
            assert_eq!(again, h);
        }
    }

    #[test]
    fn pose_length_mismatch_is_rejected() {
        let text = THREE_FINGER.replace("open_pose = [-0.35, 0.0, -0.35, 0.0, -0.35, 0.0]", "open_pose = [-0.35, 0.0]");
        assert_ne!(text, THREE_FINGER);
        assert!(matches!(load_hand(&text), Err(HandError::Schema(m)) if m.contains("open_pose")));
    }

    #[test]
    fn non_unit_axis_is_rejected() {
        let text = PARALLEL_JAW.replacen("axis = [1.0, 0.0, 0.0]", "axis = [2.0, 0.0, 0.0]", 1);
        assert_ne!(text, PARALLEL_JAW);
        assert!(matches!(load_hand(&text), Err(HandError::Schema(m)) if m.contains("unit")));
    }

    #[test]
    fn missing_field_is_rejected() {
        let text = PARALLEL_JAW.replace("name = \"parallel_jaw\"\n", "");
        assert!(matches!(load_hand(&text), Err(HandError::Schema(_))));
    }
}
