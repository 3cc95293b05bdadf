//! Wire messages exchanged with clients. All frames are JSON objects tagged
//! by `type`.

use hemigrasp_core::control::{AutonomyProfile, ControlError, Phase, SubMode, UserInput};
use hemigrasp_core::geometry::{GraspMode, HemisphereSpec, Pose};
use hemigrasp_core::planner::SamplingSpec;
use hemigrasp_core::sim::{CandidateStatus, GraspCandidate};
use serde::{Deserialize, Serialize};

/// Frames a client sends on a session stream. Unknown fields are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Input(UserInput),
    /// Request planning; only valid in the planning phase while no plan runs.
    Plan,
    /// Close the hand at the current pick pose; only valid in pick guidance.
    Execute,
}

/// Frames the service sends on a session stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Snapshot(Box<Snapshot>),
    Error(ErrorFrame),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    UnknownSession,
    UnknownScene,
    UnknownHand,
    MalformedMessage,
    IllegalTransition,
    WrongPhase,
    InvalidInput,
    MissingPlan,
    PlanInProgress,
    BadRequest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorFrame {
    pub code: ErrorCode,
    pub message: String,
}

impl ErrorFrame {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<ControlError> for ErrorFrame {
    fn from(e: ControlError) -> Self {
        let code = match e {
            ControlError::WrongPhase { .. } => ErrorCode::WrongPhase,
            ControlError::IllegalTransition { .. } => ErrorCode::IllegalTransition,
            ControlError::MissingPlan => ErrorCode::MissingPlan,
            ControlError::InvalidInput => ErrorCode::InvalidInput,
        };
        ErrorFrame::new(code, e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseView {
    pub position: [f64; 3],
    /// Quaternion `[x, y, z, w]`.
    pub orientation: [f64; 4],
}

impl From<&Pose> for PoseView {
    fn from(p: &Pose) -> Self {
        let q = p.orientation.quaternion();
        Self {
            position: [p.position.x, p.position.y, p.position.z],
            orientation: [q.i, q.j, q.k, q.w],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HemisphereView {
    pub center: [f64; 3],
    pub radius: f64,
    pub base_height: f64,
}

impl From<&HemisphereSpec> for HemisphereView {
    fn from(h: &HemisphereSpec) -> Self {
        Self {
            center: [h.center.x, h.center.y, h.center.z],
            radius: h.radius,
            base_height: h.base_height,
        }
    }
}

/// One planner candidate as drawn by a client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateView {
    pub approach: PoseView,
    pub angular_offset: f64,
    pub flexion: f64,
    pub status: CandidateStatus,
    pub epsilon: f64,
}

impl From<&GraspCandidate> for CandidateView {
    fn from(c: &GraspCandidate) -> Self {
        Self {
            approach: PoseView::from(&c.approach_pose),
            angular_offset: c.angular_offset,
            flexion: c.flexion,
            status: c.status,
            epsilon: c.epsilon,
        }
    }
}

/// Session state as seen by clients. `version` increases by one for every
/// accepted frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub version: u64,
    pub session_id: String,
    pub phase: Phase,
    pub sub_mode: SubMode,
    pub profile: AutonomyProfile,
    pub mode: GraspMode,
    pub pose: PoseView,
    pub direction: [f64; 3],
    pub roll: f64,
    pub progress: f64,
    pub flexions: Vec<f64>,
    pub hemisphere: HemisphereView,
    pub planning: bool,
    pub candidates: Vec<CandidateView>,
    pub best: Option<usize>,
    pub outcome: Option<bool>,
    pub retries: u32,
}

/// Body of a session-creation request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub scene_id: String,
    #[serde(default = "default_hand")]
    pub hand: String,
    #[serde(default = "default_profile")]
    pub profile: AutonomyProfile,
    /// Grasp mode; chosen from the object height when absent.
    #[serde(default)]
    pub mode: Option<GraspMode>,
    #[serde(default)]
    pub sampling: SamplingSpec,
}

fn default_hand() -> String {
    "three_finger".into()
}

fn default_profile() -> AutonomyProfile {
    AutonomyProfile::Planned
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub snapshot: Snapshot,
}

/// Body of a scene upload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UploadScene {
    pub name: String,
    /// Object mesh as OBJ text.
    pub object_obj: String,
    #[serde(default)]
    pub position: [f64; 3],
    #[serde(default)]
    pub yaw_deg: f64,
    #[serde(default)]
    pub support_height: f64,
    #[serde(default)]
    pub physics: hemigrasp_core::sim::PhysicsParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSummary {
    pub id: String,
    pub name: String,
    pub object_height: f64,
    pub faces: usize,
    pub obstacles: usize,
}

/// Scene geometry for rendering, world frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGeometry {
    pub id: String,
    pub name: String,
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
    pub support_height: f64,
    pub obstacles: Vec<ObstacleGeometry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleGeometry {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
}
