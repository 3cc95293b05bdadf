//! One interactive session: the control state machine wired to the planner
//! and the grasp simulation. Synchronous; the server and the benchmark
//! harness drive it.

use std::sync::Arc;

use hemigrasp_core::control::{
    advance_path, apply_input, set_direction, AutonomyProfile, ControlError, Event, Gains, Phase, SessionState,
};
use hemigrasp_core::geometry::{hemisphere_for, surface_pose, GraspMode, HemisphereSpec, Pose, DEFAULT_CLEARANCE};
use hemigrasp_core::hand::HandModel;
use hemigrasp_core::planner::{flexion_set, plan, select_mode, PlanError, PlanResult, SamplingSpec, DEFAULT_MODE_THRESHOLD};
use hemigrasp_core::sim::{execute_grasp, hand_clearance, Scene, SimParams};
use nalgebra::Vector3;

use crate::protocol::{CandidateView, ClientMessage, ErrorCode, ErrorFrame, HemisphereView, PoseView, Snapshot};
use crate::record::{Execution, FailureReason, Operator, Outcome, PhaseTimings, PlanSummary, TrialRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub profile: AutonomyProfile,
    /// Chosen from the object height when `None`.
    pub mode: Option<GraspMode>,
    pub sampling: SamplingSpec,
    pub sim: SimParams,
    pub gains: Gains,
    pub workers: usize,
    pub clearance: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            profile: AutonomyProfile::Planned,
            mode: None,
            sampling: SamplingSpec::default(),
            sim: SimParams::default(),
            gains: Gains::default(),
            workers: 1,
            clearance: DEFAULT_CLEARANCE,
        }
    }
}

/// A planning request that can run on another thread.
#[derive(Debug, Clone)]
pub struct PlanJob {
    pub generation: u64,
    scene: Arc<Scene>,
    hand: Arc<HandModel>,
    user_pose: Pose,
    hemisphere: HemisphereSpec,
    sampling: SamplingSpec,
    sim: SimParams,
    workers: usize,
}

impl PlanJob {
    pub fn run(&self) -> Result<PlanResult, PlanError> {
        plan(
            &self.scene,
            &self.hand,
            &self.user_pose,
            &self.hemisphere,
            &self.sampling,
            &self.sim,
            self.workers,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Planning {
    Idle,
    Requested,
    Running,
}

pub struct SessionEngine {
    id: String,
    object_id: String,
    trial_id: String,
    operator: Operator,
    plan_scene: Arc<Scene>,
    truth_scene: Arc<Scene>,
    hand: Arc<HandModel>,
    config: SessionConfig,
    mode: GraspMode,
    state: SessionState,
    version: u64,
    planning: Planning,
    generation: u64,
    timings: PhaseTimings,
    execution: Option<Execution>,
    record: Option<TrialRecord>,
}

impl SessionEngine {
    /// Plans on `plan_scene` and judges executed grasps on `truth_scene`;
    /// the two differ only when planning against a reconstruction.
    pub fn new(
        id: impl Into<String>,
        object_id: impl Into<String>,
        plan_scene: Arc<Scene>,
        truth_scene: Arc<Scene>,
        hand: Arc<HandModel>,
        config: SessionConfig,
    ) -> Result<Self, ErrorFrame> {
        let bad = |m: String| ErrorFrame::new(ErrorCode::BadRequest, m);
        config.sampling.validate().map_err(|e| bad(e.to_string()))?;
        if config.workers == 0 {
            return Err(bad("worker count must be at least 1".into()));
        }
        let mode = config
            .mode
            .unwrap_or_else(|| select_mode(plan_scene.object_height(), DEFAULT_MODE_THRESHOLD));
        let hemi = hemisphere_for(
            &plan_scene.object_mesh,
            &plan_scene.object_pose,
            plan_scene.support_height,
            mode,
            config.clearance,
        )
        .map_err(|e| bad(e.to_string()))?;
        let id = id.into();
        Ok(Self {
            trial_id: id.clone(),
            operator: Operator::Session(id.clone()),
            id,
            object_id: object_id.into(),
            plan_scene,
            truth_scene,
            hand,
            state: SessionState::new(hemi, config.profile, 0),
            config,
            mode,
            version: 0,
            planning: Planning::Idle,
            generation: 0,
            timings: PhaseTimings::default(),
            execution: None,
            record: None,
        })
    }

    /// Labels the trial record as produced by a scripted policy.
    pub fn with_operator(mut self, trial_id: impl Into<String>, operator: Operator) -> Self {
        self.trial_id = trial_id.into();
        self.operator = operator;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn mode(&self) -> GraspMode {
        self.mode
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn hemisphere(&self) -> &HemisphereSpec {
        &self.state.hemisphere
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn truth_scene(&self) -> &Scene {
        &self.truth_scene
    }

    pub fn hand(&self) -> &HandModel {
        &self.hand
    }

    pub fn is_planning(&self) -> bool {
        self.planning != Planning::Idle
    }

    /// Trial record of a finished session.
    pub fn record(&self) -> Option<&TrialRecord> {
        self.record.as_ref()
    }

    pub fn take_record(&mut self) -> Option<TrialRecord> {
        self.record.take()
    }

    /// Applies one client frame atomically: on error nothing changes.
    pub fn handle(&mut self, msg: &ClientMessage) -> Result<(), ErrorFrame> {
        let before = self.state.phase;
        let next = match msg {
            ClientMessage::Input(input) => {
                if !(input.dt > 0.0 && input.dt.is_finite()) {
                    return Err(ControlError::InvalidInput.into());
                }
                let mut next = match before {
                    Phase::HemisphereSelect | Phase::PickGuidance => apply_input(&self.state, input, &self.config.gains)?,
                    // Stick motion outside the steerable phases has no effect.
                    _ => self.state.clone(),
                };
                for event in input.events() {
                    next = self.advance(&next, &event)?;
                }
                match before {
                    Phase::HemisphereSelect => self.timings.select += input.dt,
                    Phase::PickGuidance => self.timings.pick += input.dt,
                    _ => {}
                }
                next
            }
            ClientMessage::Plan => {
                if before != Phase::Planning {
                    return Err(ControlError::IllegalTransition {
                        phase: before,
                        event: "plan".into(),
                    }
                    .into());
                }
                if self.is_planning() {
                    return Err(ErrorFrame::new(ErrorCode::PlanInProgress, "a plan is already running"));
                }
                self.planning = Planning::Requested;
                self.state.clone()
            }
            ClientMessage::Execute => {
                if before != Phase::PickGuidance {
                    return Err(ControlError::IllegalTransition {
                        phase: before,
                        event: "execute".into(),
                    }
                    .into());
                }
                let mut next = self.state.clone();
                if self.state.profile == AutonomyProfile::Planned {
                    next.progress = 1.0;
                }
                self.advance(&next, &Event::Confirm)?
            }
        };
        self.commit(next);
        Ok(())
    }

    fn advance(&self, state: &SessionState, event: &Event) -> Result<SessionState, ErrorFrame> {
        let path = advance_path(state, event)?;
        Ok(path.into_iter().last().expect("at least one state"))
    }

    fn commit(&mut self, next: SessionState) {
        let entered_planning = next.phase == Phase::Planning && self.state.phase != Phase::Planning;
        if next.phase != Phase::Planning && self.state.phase == Phase::Planning {
            // Cancelled: a result still in flight is stale.
            self.planning = Planning::Idle;
            self.generation += 1;
        }
        if next.phase == Phase::HemisphereSelect && self.state.phase != Phase::HemisphereSelect {
            self.execution = None;
        }
        self.state = next;
        if entered_planning {
            self.planning = Planning::Requested;
            self.generation += 1;
        }
        if self.state.phase == Phase::Closing {
            self.execute();
        }
        self.version += 1;
    }

    /// Hands out the pending planning request, once.
    pub fn take_plan_job(&mut self) -> Option<PlanJob> {
        if self.planning != Planning::Requested {
            return None;
        }
        self.planning = Planning::Running;
        Some(PlanJob {
            generation: self.generation,
            scene: self.plan_scene.clone(),
            hand: self.hand.clone(),
            user_pose: self.state.confirmed_pose.unwrap_or_else(|| self.state.hemisphere_pose()),
            hemisphere: self.state.hemisphere,
            sampling: self.config.sampling.clone(),
            sim: self.config.sim,
            workers: self.config.workers,
        })
    }

    /// Delivers a finished plan. Results of superseded jobs are dropped and
    /// return `Ok(false)`.
    pub fn complete_plan(&mut self, generation: u64, result: Result<PlanResult, PlanError>) -> Result<bool, ErrorFrame> {
        if generation != self.generation || self.planning != Planning::Running || self.state.phase != Phase::Planning {
            return Ok(false);
        }
        self.planning = Planning::Idle;
        let plan = match result {
            Ok(p) => p,
            Err(e) => {
                // Nothing to guide toward: back to approach selection.
                let mut next = self.state.clone();
                next.phase = Phase::HemisphereSelect;
                next.confirmed_pose = None;
                next.retries += 1;
                self.commit(next);
                return Err(ErrorFrame::new(ErrorCode::BadRequest, e.to_string()));
            }
        };
        *self.timings.plan.get_or_insert(0.0) += plan.timing.wall_seconds;
        let next = self.advance(&self.state, &Event::PlanCompleted { plan: Box::new(plan) })?;
        self.commit(next);
        Ok(true)
    }

    /// Runs any pending plan on the calling thread.
    pub fn run_pending_plan(&mut self) -> Result<(), ErrorFrame> {
        while let Some(job) = self.take_plan_job() {
            let result = job.run();
            self.complete_plan(job.generation, result)?;
        }
        Ok(())
    }

    /// Places the end-effector on the hemisphere at `direction` and `roll`,
    /// as a scripted stand-in for steering. Only in `HemisphereSelect`.
    pub fn place(&mut self, direction: &Vector3<f64>, roll: f64) -> Result<(), ErrorFrame> {
        if self.state.phase != Phase::HemisphereSelect {
            return Err(ControlError::WrongPhase { phase: self.state.phase }.into());
        }
        let mut next = set_direction(&self.state, direction)
            .ok_or_else(|| ErrorFrame::new(ErrorCode::InvalidInput, "direction is zero or below the base"))?;
        next.roll = roll;
        next.free_pose = surface_pose(&next.hemisphere, &next.direction, roll).expect("direction validated");
        self.commit(next);
        Ok(())
    }

    /// Pre-shape flexion used when closing.
    fn closing_flexion(&self) -> f64 {
        match self.state.plan.as_ref().and_then(|p| p.best_candidate()) {
            Some(best) if self.state.profile == AutonomyProfile::Planned => best.flexion,
            _ => flexion_set(self.mode)[0],
        }
    }

    fn grasp_pose(&self) -> Pose {
        match self.state.plan.as_ref().and_then(|p| p.best_candidate()) {
            Some(best) if self.state.profile == AutonomyProfile::Planned => best.hand_pose_at_grasp,
            _ => self.state.end_effector_pose(),
        }
    }

    /// Closes the hand on the true object and finishes the session.
    fn execute(&mut self) {
        let scene = &*self.truth_scene;
        let sim = &self.config.sim;
        let pose = self.grasp_pose();
        let flexion = self.closing_flexion();
        let open = vec![flexion; self.hand.fingers.len()];
        let clearance = hand_clearance(scene, &self.hand, &open, &pose);
        let (outcome, execution) = if clearance < -sim.contact_tol {
            (Outcome::Failure(FailureReason::Penetration), None)
        } else {
            let (closed, held, epsilon) = execute_grasp(scene, &self.hand, &pose, flexion, sim);
            let contacts = closed.object_contacts();
            let outcome = if held {
                Outcome::Success
            } else if contacts.len() < 2 {
                Outcome::Failure(FailureReason::NoContact)
            } else {
                Outcome::Failure(FailureReason::Unstable)
            };
            let execution = Execution {
                grasp_pose: pose,
                flexion,
                final_flexions: closed.flexions,
                contacts,
                epsilon,
                held,
                reference: scene.reference(),
                torque_scale: scene.torque_scale(),
                max_force_per_contact: self.hand.max_force_per_contact,
                cone_edges: sim.cone_edges,
                physics: scene.physics,
            };
            (outcome, Some(execution))
        };
        let next = advance_path(
            &self.state,
            &Event::GraspClosed {
                success: outcome.is_success(),
            },
        )
        .expect("closing accepts grasp_closed")
        .pop()
        .expect("one state");
        self.state = next;
        self.execution = execution.clone();
        self.record = Some(self.build_record(outcome, execution));
    }

    fn build_record(&self, outcome: Outcome, execution: Option<Execution>) -> TrialRecord {
        TrialRecord {
            trial_id: self.trial_id.clone(),
            object_id: self.object_id.clone(),
            object_pose: self.truth_scene.object_pose,
            mode: self.mode,
            profile: self.state.profile,
            operator: self.operator.clone(),
            plan: self.state.plan.as_ref().map(PlanSummary::of),
            execution,
            outcome,
            timings: self.timings,
        }
    }

    /// Record for a session that stopped before `Done`.
    pub fn failure_record(&self, reason: FailureReason) -> TrialRecord {
        self.build_record(Outcome::Failure(reason), None)
    }

    pub fn snapshot(&self) -> Snapshot {
        let s = &self.state;
        let flexions = match &self.execution {
            Some(e) => e.final_flexions.clone(),
            None => vec![self.closing_flexion(); self.hand.fingers.len()],
        };
        let pose = match &self.execution {
            Some(e) => e.grasp_pose,
            None => s.end_effector_pose(),
        };
        Snapshot {
            version: self.version,
            session_id: self.id.clone(),
            phase: s.phase,
            sub_mode: s.sub_mode,
            profile: s.profile,
            mode: self.mode,
            pose: PoseView::from(&pose),
            direction: [s.direction.x, s.direction.y, s.direction.z],
            roll: s.roll,
            progress: s.progress,
            flexions,
            hemisphere: HemisphereView::from(&s.hemisphere),
            planning: self.is_planning(),
            candidates: s
                .plan
                .as_ref()
                .map(|p| p.candidates.iter().map(CandidateView::from).collect())
                .unwrap_or_default(),
            best: s.plan.as_ref().and_then(|p| p.best),
            outcome: s.outcome,
            retries: s.retries,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use hemigrasp_core::control::UserInput;
    use hemigrasp_core::geometry::primitives;
    use hemigrasp_core::hand::builtin_hand;
    use hemigrasp_core::sim::PhysicsParams;

    fn engine(profile: AutonomyProfile) -> SessionEngine {
        let can = primitives::cylinder(0.034, 0.1, 32);
        let scene = Arc::new(Scene::new(can, Pose::from_translation(Vector3::new(0.0, 0.0, 0.05)), PhysicsParams::default(), 0.0).unwrap());
        let config = SessionConfig {
            profile,
            ..SessionConfig::default()
        };
        SessionEngine::new("s1", "can", scene.clone(), scene, Arc::new(builtin_hand("three_finger").unwrap()), config).unwrap()
    }

    fn confirm() -> ClientMessage {
        ClientMessage::Input(UserInput {
            confirm: true,
            dt: 0.05,
            ..UserInput::default()
        })
    }

    #[test]
    fn planned_session_reaches_done() {
        let mut e = engine(AutonomyProfile::Planned);
        assert_eq!(e.snapshot().phase, Phase::ObjectSelect);
        e.handle(&confirm()).unwrap();
        e.handle(&confirm()).unwrap();
        assert_eq!(e.state().phase, Phase::Planning);
        assert!(e.snapshot().planning);
        assert_eq!(e.handle(&ClientMessage::Plan).unwrap_err().code, ErrorCode::PlanInProgress);
        e.run_pending_plan().unwrap();
        assert_eq!(e.state().phase, Phase::PickGuidance);
        assert_eq!(e.snapshot().candidates.len(), 50);
        e.handle(&ClientMessage::Execute).unwrap();
        assert_eq!(e.state().phase, Phase::Done);
        let r = e.record().unwrap();
        assert!(r.is_consistent());
        assert_eq!(r.outcome, Outcome::Success);
    }

    #[test]
    fn rejected_frames_change_nothing() {
        let mut e = engine(AutonomyProfile::Planned);
        let v = e.version();
        assert_eq!(e.handle(&ClientMessage::Plan).unwrap_err().code, ErrorCode::IllegalTransition);
        let bad = ClientMessage::Input(UserInput::axes(1.0, 0.0, 0.0, 0.0));
        assert_eq!(e.handle(&bad).unwrap_err().code, ErrorCode::InvalidInput);
        assert_eq!(e.version(), v);
        assert_eq!(e.state().phase, Phase::ObjectSelect);
    }

    #[test]
    fn cancel_mid_plan_drops_the_result() {
        let mut e = engine(AutonomyProfile::Planned);
        e.handle(&confirm()).unwrap();
        e.handle(&confirm()).unwrap();
        let job = e.take_plan_job().unwrap();
        let cancel = ClientMessage::Input(UserInput {
            cancel: true,
            dt: 0.05,
            ..UserInput::default()
        });
        e.handle(&cancel).unwrap();
        assert!(!e.is_planning());
        assert_eq!(e.complete_plan(job.generation, job.run()), Ok(false));
        assert_eq!(e.state().phase, Phase::HemisphereSelect);
        assert!(e.state().plan.is_none());
    }
}
