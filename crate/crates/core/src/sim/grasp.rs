use serde::{Deserialize, Serialize};

use super::probe::{probe_capsule, probe_plane, sphere_bound};
use super::{hold_test, ContactPoint, ContactSource, GraspState, GraspStatus, Scene, SimParams};
use crate::geometry::{GraspMode, Pose};
use crate::hand::{HandModel, WorldCapsule};
use crate::quality::{epsilon_or_zero, wrench_set};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateStatus {
    Success,
    Unstable,
    NoContact,
    ObstacleCollision,
    FilteredBelowSurface,
}

impl std::fmt::Display for CandidateStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CandidateStatus::Success => "success",
            CandidateStatus::Unstable => "unstable",
            CandidateStatus::NoContact => "no_contact",
            CandidateStatus::ObstacleCollision => "obstacle_collision",
            CandidateStatus::FilteredBelowSurface => "filtered_below_surface",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspCandidate {
    pub approach_pose: Pose,
    /// Angle between this approach direction and the user's, degrees.
    pub angular_offset: f64,
    /// Position on its circumference; `None` for the user's own pose.
    pub azimuth_index: Option<usize>,
    pub flexion: f64,
    pub status: CandidateStatus,
    pub epsilon: f64,
    pub contacts: Vec<ContactPoint>,
    /// Backed-off pose from which the fingers close.
    pub hand_pose_at_grasp: Pose,
    /// Per-finger flexion after closing.
    pub final_flexions: Vec<f64>,
}

impl GraspCandidate {
    pub fn unsimulated(approach_pose: Pose, flexion: f64, status: CandidateStatus) -> Self {
        Self {
            approach_pose,
            angular_offset: 0.0,
            azimuth_index: None,
            flexion,
            status,
            epsilon: 0.0,
            contacts: Vec::new(),
            hand_pose_at_grasp: approach_pose,
            final_flexions: Vec::new(),
        }
    }

    pub fn object_contacts(&self) -> Vec<ContactPoint> {
        self.contacts.iter().filter(|c| c.on_object()).copied().collect()
    }
}

/// Exact probes are skipped for parts whose bounding sphere is farther.
const PROBE_RADIUS: f64 = 0.02;
/// Contacts of one capsule closer than this are merged.
const MERGE_DISTANCE: f64 = 0.005;

struct Sweep {
    contacts: Vec<ContactPoint>,
    /// Lower bound on the separation from the object.
    object_gap: f64,
    plane_gap: f64,
    obstacle_gap: f64,
}

fn object_contacts_of(scene: &Scene, cap: &WorldCapsule, tol: f64, out: &mut Vec<ContactPoint>) -> f64 {
    let mut gap = f64::INFINITY;
    let first = out.len();
    for (part, (center, radius)) in scene.object_parts.iter().zip(scene.part_spheres()) {
        let bound = sphere_bound(&cap.capsule, center, *radius);
        if bound > PROBE_RADIUS {
            gap = gap.min(bound);
            continue;
        }
        let p = probe_capsule(&cap.capsule, part);
        gap = gap.min(p.separation);
        if p.separation <= tol {
            let contact = ContactPoint {
                position: p.point,
                normal: p.normal,
                mu: cap.capsule.mu.min(scene.physics.mu_lateral),
                source: cap.source,
            };
            // Parts meeting at a seam report the same touch twice.
            if !out[first..].iter().any(|c| (c.position - p.point).norm() < MERGE_DISTANCE) {
                out.push(contact);
            }
        }
    }
    gap
}

fn sweep(scene: &Scene, caps: &[WorldCapsule], tol: f64) -> Sweep {
    let mut s = Sweep {
        contacts: Vec::new(),
        object_gap: f64::INFINITY,
        plane_gap: f64::INFINITY,
        obstacle_gap: f64::INFINITY,
    };
    for cap in caps {
        let gap = object_contacts_of(scene, cap, tol, &mut s.contacts);
        s.object_gap = s.object_gap.min(gap);
        let plane = probe_plane(&cap.capsule, scene.support_height);
        s.plane_gap = s.plane_gap.min(plane.separation);
        if plane.separation <= tol {
            s.contacts.push(ContactPoint {
                position: plane.point,
                normal: plane.normal,
                mu: cap.capsule.mu.min(scene.physics.mu_lateral),
                source: ContactSource::World,
            });
        }
        for obstacle in &scene.obstacles {
            for (part, (center, radius)) in obstacle.parts.iter().zip(obstacle.spheres()) {
                let bound = sphere_bound(&cap.capsule, center, *radius);
                let gap = if bound > PROBE_RADIUS {
                    bound
                } else {
                    probe_capsule(&cap.capsule, part).separation
                };
                s.obstacle_gap = s.obstacle_gap.min(gap);
            }
        }
    }
    s
}

fn qualifying(contacts: &[ContactPoint], count_world: bool) -> usize {
    contacts.iter().filter(|c| count_world || c.on_object()).count()
}

/// Moves the hand along its approach axis in fixed increments until enough
/// contacts appear.
///
/// Positions at which no surface can be within the contact tolerance are
/// skipped, which gives the same result as visiting every increment. When
/// the next increment would push the hand more than the contact tolerance
/// into the object or the support plane, the approach stops where it is.
pub fn approach_until_contact(
    scene: &Scene,
    hand: &HandModel,
    start_pose: &Pose,
    flexion: f64,
    min_contacts: usize,
    count_world: bool,
    sim: &SimParams,
) -> GraspState {
    let flexions = vec![flexion.clamp(0.0, 1.0); hand.fingers.len()];
    let axis = start_pose.approach_axis();
    let tol = sim.contact_tol;
    let at = |n: u64| start_pose.translated(&(axis * (sim.step * n as f64)));
    let state = |pose: Pose, contacts: Vec<ContactPoint>, status: GraspStatus| GraspState {
        hand_pose: pose,
        flexions: flexions.clone(),
        contacts,
        status,
    };
    let max_steps = (sim.max_travel / sim.step).floor() as u64;
    let mut n: u64 = 0;
    let mut pose = *start_pose;
    let mut current = sweep(scene, &hand.capsules(&flexions, &pose), tol);
    if current.obstacle_gap < 0.0 {
        return state(pose, Vec::new(), GraspStatus::ObstacleCollision);
    }
    loop {
        if qualifying(&current.contacts, count_world) >= min_contacts {
            return state(pose, current.contacts, GraspStatus::Contacted);
        }
        let gap = current.object_gap.min(current.plane_gap).min(current.obstacle_gap);
        let skip = if gap > tol { (((gap - tol) / sim.step).floor() as u64).max(1) } else { 1 };
        if n >= max_steps {
            return state(pose, current.contacts, GraspStatus::NoContact);
        }
        let next_n = (n + skip).min(max_steps);
        let next_pose = at(next_n);
        let next = sweep(scene, &hand.capsules(&flexions, &next_pose), tol);
        if next.obstacle_gap < 0.0 {
            return state(next_pose, Vec::new(), GraspStatus::ObstacleCollision);
        }
        if next.object_gap < -tol || next.plane_gap < -tol {
            let status = if current.contacts.is_empty() {
                GraspStatus::NoContact
            } else {
                GraspStatus::Contacted
            };
            return state(pose, current.contacts, status);
        }
        n = next_n;
        pose = next_pose;
        current = next;
    }
}

fn finger_touches(scene: &Scene, caps: &[WorldCapsule], tol: f64) -> (bool, f64) {
    let mut scratch = Vec::new();
    let mut gap = f64::INFINITY;
    for cap in caps {
        gap = gap.min(object_contacts_of(scene, cap, tol, &mut scratch));
    }
    (!scratch.is_empty(), gap)
}

/// Closes each finger in flexion increments until one of its links touches
/// the object or it is fully closed. The object stays fixed.
pub fn close_fingers(
    scene: &Scene,
    hand: &HandModel,
    hand_pose: &Pose,
    start_flexion: f64,
    sim: &SimParams,
) -> GraspState {
    let start = start_flexion.clamp(0.0, 1.0);
    let tol = sim.contact_tol;
    let d = sim.d_flexion;
    let mut flexions = vec![start; hand.fingers.len()];
    for (f, flex) in flexions.iter_mut().enumerate() {
        let speed = hand.finger_speed_bound(f) * d;
        let mut n: u64 = 0;
        let mut x = start;
        loop {
            let (touch, gap) = finger_touches(scene, &hand.finger_capsules(f, x, hand_pose), tol);
            if touch || x >= 1.0 {
                break;
            }
            let skip = if gap > tol && speed > 0.0 {
                (((gap - tol) / speed).floor().min(1e9) as u64).max(1)
            } else {
                1
            };
            n += skip;
            x = (start + n as f64 * d).min(1.0);
        }
        *flex = x;
    }
    let contacts = sweep(scene, &hand.capsules(&flexions, hand_pose), tol).contacts;
    let status = if contacts.iter().any(|c| c.on_object()) {
        GraspStatus::Contacted
    } else {
        GraspStatus::NoContact
    };
    GraspState {
        hand_pose: *hand_pose,
        flexions,
        contacts,
        status,
    }
}

/// Smallest separation between the hand at `flexions` and the object, the
/// support plane or an obstacle; negative when penetrating. Distances beyond
/// a couple of centimetres are lower bounds.
pub fn hand_clearance(scene: &Scene, hand: &HandModel, flexions: &[f64], hand_pose: &Pose) -> f64 {
    let s = sweep(scene, &hand.capsules(flexions, hand_pose), 0.0);
    s.object_gap.min(s.plane_gap).min(s.obstacle_gap)
}

/// Evaluates one approach pose and pre-shape flexion.
pub fn simulate_grasp(
    scene: &Scene,
    hand: &HandModel,
    approach_pose: &Pose,
    flexion: f64,
    mode: GraspMode,
    sim: &SimParams,
) -> GraspCandidate {
    let (min_contacts, count_world) = match mode {
        GraspMode::Power => (2, false),
        GraspMode::Precision => (3, true),
    };
    let reached = approach_until_contact(scene, hand, approach_pose, flexion, min_contacts, count_world, sim);
    match reached.status {
        GraspStatus::NoContact => {
            return GraspCandidate::unsimulated(*approach_pose, flexion, CandidateStatus::NoContact)
        }
        GraspStatus::ObstacleCollision => {
            return GraspCandidate::unsimulated(*approach_pose, flexion, CandidateStatus::ObstacleCollision)
        }
        GraspStatus::InProgress | GraspStatus::Contacted => {}
    }
    let axis = approach_pose.approach_axis();
    let backed = reached.hand_pose.translated(&(-axis * sim.backoff_margin));
    let (closed, success, epsilon) = execute_grasp(scene, hand, &backed, flexion, sim);
    GraspCandidate {
        approach_pose: *approach_pose,
        angular_offset: 0.0,
        azimuth_index: None,
        flexion,
        status: if success {
            CandidateStatus::Success
        } else {
            CandidateStatus::Unstable
        },
        epsilon,
        contacts: closed.contacts,
        hand_pose_at_grasp: backed,
        final_flexions: closed.flexions,
    }
}

/// Closes the hand at `grasp_pose` and judges the result on this scene:
/// returns the closed state, the hold-test verdict and ε.
pub fn execute_grasp(
    scene: &Scene,
    hand: &HandModel,
    grasp_pose: &Pose,
    flexion: f64,
    sim: &SimParams,
) -> (GraspState, bool, f64) {
    let closed = close_fingers(scene, hand, grasp_pose, flexion, sim);
    let on_object = closed.object_contacts();
    let reference = scene.reference();
    let epsilon = wrench_set(&on_object, sim.cone_edges, scene.torque_scale(), &reference)
        .map(|ws| epsilon_or_zero(&ws))
        .unwrap_or(0.0);
    let success = on_object.len() >= 2
        && hold_test(&on_object, &scene.physics, sim.cone_edges, hand.max_force_per_contact, &reference);
    (closed, success, epsilon)
}
