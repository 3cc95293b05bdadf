//! Trial records and their line-delimited JSON log.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use hemigrasp_core::control::AutonomyProfile;
use hemigrasp_core::geometry::{GraspMode, Pose};
use hemigrasp_core::planner::PlanResult;
use hemigrasp_core::sim::{CandidateStatus, ContactPoint, PhysicsParams};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("trial log {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("trial log {path} line {line}: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// Who chose the approach.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum Operator {
    Policy(String),
    Session(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub candidates: usize,
    pub simulated: usize,
    pub successes: usize,
    pub statuses: Vec<CandidateStatus>,
    pub epsilons: Vec<f64>,
    pub best: Option<usize>,
    pub best_epsilon: Option<f64>,
}

impl PlanSummary {
    pub fn of(plan: &PlanResult) -> Self {
        Self {
            candidates: plan.candidates.len(),
            simulated: plan.simulated_count(),
            successes: plan.success_count(),
            statuses: plan.candidates.iter().map(|c| c.status).collect(),
            epsilons: plan.candidates.iter().map(|c| c.epsilon).collect(),
            best: plan.best,
            best_epsilon: plan.best_candidate().map(|c| c.epsilon),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", content = "reason", rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Failure(FailureReason),
}

impl Outcome {
    pub fn is_success(&self) -> bool {
        matches!(self, Outcome::Success)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    /// The planner found no successful candidate.
    NoSuccessfulCandidate,
    /// The hand intersects the object, support or an obstacle when closing.
    Penetration,
    /// Fewer than two fingers ended on the object.
    NoContact,
    /// The contacts cannot hold the object against gravity.
    Unstable,
    /// A scripted input stream ended before the session finished.
    Incomplete,
}

/// Everything needed to re-derive the hold verdict and ε of an executed
/// grasp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Execution {
    pub grasp_pose: Pose,
    pub flexion: f64,
    pub final_flexions: Vec<f64>,
    /// Object contacts after closing.
    pub contacts: Vec<ContactPoint>,
    pub epsilon: f64,
    pub held: bool,
    pub reference: Vector3<f64>,
    pub torque_scale: f64,
    pub max_force_per_contact: f64,
    pub cone_edges: usize,
    pub physics: PhysicsParams,
}

/// Seconds spent per phase. Select and pick sum input time steps; plan is
/// wall time and is absent from benchmark logs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub select: f64,
    pub plan: Option<f64>,
    pub pick: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: String,
    pub object_id: String,
    pub object_pose: Pose,
    pub mode: GraspMode,
    pub profile: AutonomyProfile,
    pub operator: Operator,
    pub plan: Option<PlanSummary>,
    pub execution: Option<Execution>,
    pub outcome: Outcome,
    pub timings: PhaseTimings,
}

impl TrialRecord {
    /// Checks the record's internal invariants.
    pub fn is_consistent(&self) -> bool {
        let t = &self.timings;
        let times_ok = t.select >= 0.0 && t.pick >= 0.0 && t.plan.is_none_or(|p| p >= 0.0);
        let plan_ok = self.plan.as_ref().is_none_or(|p| {
            p.statuses.len() == p.candidates
                && p.best.is_none_or(|b| p.statuses.get(b) == Some(&CandidateStatus::Success))
                && p.best.is_some() == p.best_epsilon.is_some()
        });
        let outcome_ok = match &self.outcome {
            Outcome::Success => {
                self.execution.as_ref().is_some_and(|e| e.held)
                    && (self.profile != AutonomyProfile::Planned || self.plan.as_ref().is_some_and(|p| p.best.is_some()))
            }
            Outcome::Failure(FailureReason::NoSuccessfulCandidate) => {
                self.plan.as_ref().is_some_and(|p| p.best.is_none())
            }
            Outcome::Failure(_) => self.execution.as_ref().is_none_or(|e| !e.held),
        };
        times_ok && plan_ok && outcome_ok
    }
}

/// Append-only JSON-lines file of trial records. Appends through one value
/// are serialized.
#[derive(Debug)]
pub struct TrialLog {
    path: PathBuf,
    file: Mutex<File>,
}

impl TrialLog {
    pub fn open(path: &Path) -> Result<Self, LogError> {
        let io = |source| LogError::Io {
            path: path.to_path_buf(),
            source,
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
        Ok(Self {
            path: path.to_path_buf(),
            file: Mutex::new(file),
        })
    }

    /// Starts an empty log, replacing any existing file.
    pub fn create(path: &Path) -> Result<Self, LogError> {
        let io = |source| LogError::Io {
            path: path.to_path_buf(),
            source,
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        File::create(path).map_err(io)?;
        Self::open(path)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, record: &TrialRecord) -> Result<(), LogError> {
        let mut line = serde_json::to_string(record).expect("records serialize");
        line.push('\n');
        let mut file = self.file.lock().unwrap_or_else(|e| e.into_inner());
        file.write_all(line.as_bytes()).map_err(|source| LogError::Io {
            path: self.path.clone(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Vec<TrialRecord>, LogError> {
        let file = File::open(path).map_err(|source| LogError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut out = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|source| LogError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line).map_err(|source| LogError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                source,
            })?);
        }
        Ok(out)
    }
}
