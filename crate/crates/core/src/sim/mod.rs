//! Deterministic quasi-static grasp simulation: approach, back-off, finger
//! closing and a gravity hold test.

mod grasp;
mod hold;
mod probe;
mod scene;

pub use grasp::{
    approach_until_contact, close_fingers, execute_grasp, hand_clearance, simulate_grasp, CandidateStatus, GraspCandidate,
};
pub use hold::hold_test;
pub use probe::{probe_capsule, Probe};
pub use scene::{collision_parts, load_scene_file, Obstacle, ObstacleFile, PlacementFile, Scene, SceneFile};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, Pose};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid physics parameters: {0}")]
    InvalidPhysics(String),
    #[error("scene file: {0}")]
    SceneFile(String),
    #[error("object starts below the support plane")]
    ObjectBelowSupport,
}

/// Hand part touching a surface; `World` marks a hand contact with the
/// support plane rather than the object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactSource {
    Finger(usize),
    Palm,
    World,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactPoint {
    /// On the object (or support plane) surface, world frame.
    pub position: Vector3<f64>,
    /// Unit normal pointing from the surface into the hand.
    pub normal: Vector3<f64>,
    pub mu: f64,
    pub source: ContactSource,
}

impl ContactPoint {
    pub fn on_object(&self) -> bool {
        self.source != ContactSource::World
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysicsParams {
    pub mass: f64,
    pub mu_lateral: f64,
    /// Stored for configuration fidelity; point contacts ignore it.
    pub mu_rolling: f64,
    /// Stored for configuration fidelity; point contacts ignore it.
    pub mu_spinning: f64,
    /// Gravitational acceleration vector, m/s².
    pub gravity: Vector3<f64>,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        Self {
            mass: 0.3,
            mu_lateral: 0.3,
            mu_rolling: 0.01,
            mu_spinning: 0.01,
            gravity: Vector3::new(0.0, 0.0, -9.81),
        }
    }
}

impl PhysicsParams {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.mass > 0.0) {
            return Err(SimError::InvalidPhysics("mass must be positive".into()));
        }
        if [self.mu_lateral, self.mu_rolling, self.mu_spinning].iter().any(|m| !(*m >= 0.0)) {
            return Err(SimError::InvalidPhysics("friction coefficients must be nonnegative".into()));
        }
        if !self.gravity.iter().all(|g| g.is_finite()) {
            return Err(SimError::InvalidPhysics("gravity must be finite".into()));
        }
        Ok(())
    }
}

/// Discretization and tolerance settings of the simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    /// Separation at or below which surfaces are in contact, m.
    pub contact_tol: f64,
    /// Approach increment, m.
    pub step: f64,
    pub max_travel: f64,
    /// Closing increment in flexion.
    pub d_flexion: f64,
    /// Retraction after first contact, m.
    pub backoff_margin: f64,
    pub cone_edges: usize,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            contact_tol: 5e-4,
            step: 1e-3,
            max_travel: 1.0,
            d_flexion: 0.005,
            backoff_margin: 0.005,
            cone_edges: crate::quality::DEFAULT_CONE_EDGES,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraspStatus {
    InProgress,
    Contacted,
    NoContact,
    ObstacleCollision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspState {
    pub hand_pose: Pose,
    pub flexions: Vec<f64>,
    pub contacts: Vec<ContactPoint>,
    pub status: GraspStatus,
}

impl GraspState {
    pub fn object_contacts(&self) -> Vec<ContactPoint> {
        self.contacts.iter().filter(|c| c.on_object()).copied().collect()
    }
}
