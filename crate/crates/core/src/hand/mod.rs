//! Configuration-driven kinematic hands with a one-dimensional flexion
//! synergy.

mod config;

pub use config::{builtin_hand, load_hand, load_hand_file, BUILTIN_HANDS};

use nalgebra::{Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Pose;
use crate::sim::ContactSource;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HandError {
    #[error("hand schema: {0}")]
    Schema(String),
    #[error("flexion {0} is outside [0, 1]")]
    FlexionOutOfRange(f64),
    #[error("unknown hand `{0}`")]
    UnknownHand(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointKind {
    /// Rotation about `axis` by the joint value (radians).
    Revolute,
    /// Translation along `axis` by the joint value (meters).
    Prismatic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub kind: JointKind,
    /// Joint origin in the frame of the preceding link.
    pub origin: Vector3<f64>,
    pub axis: Vector3<f64>,
    pub range: (f64, f64),
}

impl Joint {
    fn transform(&self, q: f64) -> Pose {
        let q = q.clamp(self.range.0, self.range.1);
        match self.kind {
            JointKind::Revolute => Pose::new(
                self.origin,
                UnitQuaternion::from_axis_angle(&Unit::new_unchecked(self.axis), q),
            ),
            JointKind::Prismatic => Pose::from_translation(self.origin + self.axis * q),
        }
    }
}

/// Segment `a`–`b` swept by a sphere of `radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Capsule {
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
    pub radius: f64,
    pub mu: f64,
}

impl Capsule {
    pub fn transformed(&self, pose: &Pose) -> Capsule {
        Capsule {
            a: pose.transform_point(&self.a),
            b: pose.transform_point(&self.b),
            ..*self
        }
    }
}

/// A capsule placed in the world, tagged with the hand part it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldCapsule {
    pub capsule: Capsule,
    pub source: ContactSource,
    /// Link index within the finger (palm capsules count from 0).
    pub link: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerChain {
    /// Finger base in the palm frame.
    pub base: Pose,
    pub joints: Vec<Joint>,
    /// `links[i]` is rigidly attached after `joints[i]`.
    pub links: Vec<Capsule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandModel {
    pub name: String,
    /// Tool frame to palm frame.
    pub palm_offset: Pose,
    pub palm: Vec<Capsule>,
    pub fingers: Vec<FingerChain>,
    pub open_pose: Vec<f64>,
    pub closed_pose: Vec<f64>,
    pub max_force_per_contact: f64,
}

impl HandModel {
    pub fn joint_count(&self) -> usize {
        self.fingers.iter().map(|f| f.joints.len()).sum()
    }

    /// Index of the first joint of `finger` in the flattened pose vectors.
    fn joint_offset(&self, finger: usize) -> usize {
        self.fingers[..finger].iter().map(|f| f.joints.len()).sum()
    }

    /// Linear synergy; exact endpoints at 0 and 1.
    pub fn joint_angles(&self, flexion: f64) -> Result<Vec<f64>, HandError> {
        check_flexion(flexion)?;
        Ok(self
            .open_pose
            .iter()
            .zip(&self.closed_pose)
            .map(|(&o, &c)| lerp(o, c, flexion))
            .collect())
    }

    pub fn palm_capsules(&self, hand_pose: &Pose) -> Vec<WorldCapsule> {
        let palm = hand_pose.compose(&self.palm_offset);
        self.palm
            .iter()
            .enumerate()
            .map(|(i, c)| WorldCapsule {
                capsule: c.transformed(&palm),
                source: ContactSource::Palm,
                link: i,
            })
            .collect()
    }

    /// World capsules of one finger at its own flexion.
    pub fn finger_capsules(&self, finger: usize, flexion: f64, hand_pose: &Pose) -> Vec<WorldCapsule> {
        let chain = &self.fingers[finger];
        let offset = self.joint_offset(finger);
        let mut frame = hand_pose.compose(&self.palm_offset).compose(&chain.base);
        let mut out = Vec::with_capacity(chain.links.len());
        for (j, (joint, link)) in chain.joints.iter().zip(&chain.links).enumerate() {
            let q = lerp(self.open_pose[offset + j], self.closed_pose[offset + j], flexion);
            frame = frame.compose(&joint.transform(q));
            out.push(WorldCapsule {
                capsule: link.transformed(&frame),
                source: ContactSource::Finger(finger),
                link: j,
            });
        }
        out
    }

    /// All finger link capsules at a common flexion, palm excluded.
    pub fn pose_fingers(&self, flexion: f64, hand_pose: &Pose) -> Result<Vec<WorldCapsule>, HandError> {
        check_flexion(flexion)?;
        Ok((0..self.fingers.len())
            .flat_map(|f| self.finger_capsules(f, flexion, hand_pose))
            .collect())
    }

    /// Palm and finger capsules with per-finger flexions.
    pub fn capsules(&self, flexions: &[f64], hand_pose: &Pose) -> Vec<WorldCapsule> {
        let mut out = self.palm_capsules(hand_pose);
        for (f, &x) in flexions.iter().enumerate() {
            out.extend(self.finger_capsules(f, x, hand_pose));
        }
        out
    }

    /// Tip (`b` end of the last link) of a finger in the world.
    pub fn fingertip(&self, finger: usize, flexion: f64, hand_pose: &Pose) -> Vector3<f64> {
        self.finger_capsules(finger, flexion, hand_pose)
            .last()
            .map(|c| c.capsule.b)
            .unwrap_or(hand_pose.position)
    }

    /// Upper bound on how far any point of a finger's capsules moves per
    /// unit change of that finger's flexion.
    pub fn finger_speed_bound(&self, finger: usize) -> f64 {
        let chain = &self.fingers[finger];
        let offset = self.joint_offset(finger);
        let mut bound = 0.0;
        for j in 0..chain.joints.len() {
            let dq = (self.closed_pose[offset + j] - self.open_pose[offset + j]).abs();
            let lever = match chain.joints[j].kind {
                JointKind::Prismatic => 1.0,
                // Distance from this joint to the farthest downstream point.
                JointKind::Revolute => {
                    let reach: f64 = chain.joints[j + 1..].iter().map(|jt| jt.origin.norm()).sum::<f64>()
                        + chain.links[j..]
                            .iter()
                            .map(|l| l.a.norm().max(l.b.norm()))
                            .fold(0.0, f64::max)
                        + chain.links[j..].iter().map(|l| l.radius).fold(0.0, f64::max);
                    reach
                }
            };
            bound += dq * lever;
        }
        bound
    }
}

fn check_flexion(flexion: f64) -> Result<(), HandError> {
    if (0.0..=1.0).contains(&flexion) {
        Ok(())
    } else {
        Err(HandError::FlexionOutOfRange(flexion))
    }
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else if t == 1.0 {
        b
    } else {
        (1.0 - t) * a + t * b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hands() -> Vec<HandModel> {
        BUILTIN_HANDS.iter().map(|n| builtin_hand(n).unwrap()).collect()
    }

    #[test]
    fn flexion_endpoints_and_midpoint() {
        for h in hands() {
            assert_eq!(h.joint_angles(0.0).unwrap(), h.open_pose);
            assert_eq!(h.joint_angles(1.0).unwrap(), h.closed_pose);
            let mid = h.joint_angles(0.5).unwrap();
            for ((m, o), c) in mid.iter().zip(&h.open_pose).zip(&h.closed_pose) {
                assert_eq!(*m, 0.5 * o + 0.5 * c);
            }
            assert_eq!(h.joint_angles(1.5), Err(HandError::FlexionOutOfRange(1.5)));
            assert!(h.pose_fingers(-0.1, &Pose::identity()).is_err());
        }
    }

    #[test]
    fn closing_brings_fingertips_toward_the_axis() {
        let radial = |v: Vector3<f64>| (v.x * v.x + v.y * v.y).sqrt();
        for h in hands() {
            for f in 0..h.fingers.len() {
                let open = radial(h.fingertip(f, 0.0, &Pose::identity()));
                let closed = radial(h.fingertip(f, 1.0, &Pose::identity()));
                assert!(closed < 0.5 * open, "{} finger {f}: {closed} vs {open}", h.name);
                for k in 0..=100 {
                    let tip = h.fingertip(f, k as f64 / 100.0, &Pose::identity());
                    assert!(radial(tip) > 0.0 && tip.z > 0.0, "{} finger {f} crosses the axis", h.name);
                }
            }
        }
    }

    #[test]
    fn speed_bound_dominates_observed_motion() {
        for h in hands() {
            for f in 0..h.fingers.len() {
                let bound = h.finger_speed_bound(f);
                for k in 0..100 {
                    let (x0, x1) = (k as f64 / 100.0, (k + 1) as f64 / 100.0);
                    let a = h.finger_capsules(f, x0, &Pose::identity());
                    let b = h.finger_capsules(f, x1, &Pose::identity());
                    for (ca, cb) in a.iter().zip(&b) {
                        let moved = (ca.capsule.a - cb.capsule.a).norm().max((ca.capsule.b - cb.capsule.b).norm());
                        assert!(moved <= bound * 0.01 + 1e-12);
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn capsules_transform_covariantly(
            t in prop::array::uniform3(-1.0f64..1.0),
            r in prop::array::uniform3(-3.0f64..3.0),
            t2 in prop::array::uniform3(-1.0f64..1.0),
            r2 in prop::array::uniform3(-3.0f64..3.0),
            flex in 0.0f64..1.0,
        ) {
            let p = Pose::new(Vector3::from(t), UnitQuaternion::from_scaled_axis(Vector3::from(r)));
            let q = Pose::new(Vector3::from(t2), UnitQuaternion::from_scaled_axis(Vector3::from(r2)));
            for h in hands() {
                let direct = h.pose_fingers(flex, &p.compose(&q)).unwrap();
                let local = h.pose_fingers(flex, &q).unwrap();
                for (d, l) in direct.iter().zip(&local) {
                    prop_assert!((d.capsule.a - p.transform_point(&l.capsule.a)).norm() < 1e-9);
                    prop_assert!((d.capsule.b - p.transform_point(&l.capsule.b)).norm() < 1e-9);
                }
            }
        }
    }
}
