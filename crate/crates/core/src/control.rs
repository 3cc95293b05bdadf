//! Session state machine and joystick mapping: hemisphere-constrained
//! steering, approach confirmation and guided pick.

use std::f64::consts::PI;

use nalgebra::{Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{surface_pose, tangent_basis, HemisphereSpec, Pose};
use crate::planner::PlanResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    ObjectSelect,
    HemisphereSelect,
    Planning,
    PickGuidance,
    Closing,
    Done,
    Retry,
}

impl Phase {
    pub const ALL: [Phase; 7] = [
        Phase::ObjectSelect,
        Phase::HemisphereSelect,
        Phase::Planning,
        Phase::PickGuidance,
        Phase::Closing,
        Phase::Done,
        Phase::Retry,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubMode {
    Translate,
    Rotate,
}

/// How much of the pick the system takes over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutonomyProfile {
    /// Free 6-DOF steering and a user-triggered close.
    Manual,
    /// Hemisphere steering, then a straight line to the hemisphere origin
    /// and a user-triggered close.
    ScOnly,
    /// Hemisphere steering, planning, then guidance to the planned grasp.
    Planned,
}

impl std::str::FromStr for AutonomyProfile {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "manual" => Ok(AutonomyProfile::Manual),
            "sc_only" => Ok(AutonomyProfile::ScOnly),
            "planned" => Ok(AutonomyProfile::Planned),
            other => Err(format!("unknown autonomy profile `{other}`")),
        }
    }
}

impl std::fmt::Display for AutonomyProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AutonomyProfile::Manual => "manual",
            AutonomyProfile::ScOnly => "sc_only",
            AutonomyProfile::Planned => "planned",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuidanceMode {
    Planned,
    ScOnly,
}

/// One sample from a 3-DOF input device.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct UserInput {
    pub axes: [f64; 3],
    pub toggle_mode: bool,
    pub confirm: bool,
    pub cancel: bool,
    /// Seconds since the previous sample.
    pub dt: f64,
}

impl UserInput {
    pub fn axes(dx: f64, dy: f64, dz: f64, dt: f64) -> Self {
        Self {
            axes: [dx, dy, dz],
            dt,
            ..Self::default()
        }
    }

    /// Axes clamped to `[-1, 1]`; non-finite values read as zero.
    pub fn clamped_axes(&self) -> [f64; 3] {
        self.axes.map(|a| if a.is_finite() { a.clamp(-1.0, 1.0) } else { 0.0 })
    }

    /// Button edges turned into state-machine events, confirm first.
    pub fn events(&self) -> Vec<Event> {
        let mut out = Vec::new();
        if self.confirm {
            out.push(Event::Confirm);
        }
        if self.cancel {
            out.push(Event::Cancel);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Gains {
    /// Geodesic rate at full deflection, rad/s.
    pub translate: f64,
    /// Roll rate at full deflection, rad/s.
    pub rotate: f64,
    /// Pick progress rate at full deflection, 1/s.
    pub progress: f64,
}

impl Default for Gains {
    fn default() -> Self {
        Self {
            translate: 0.5,
            rotate: 1.0,
            progress: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    Confirm,
    Cancel,
    PlanCompleted { plan: Box<PlanResult> },
    GraspClosed { success: bool },
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::Confirm => "confirm",
            Event::Cancel => "cancel",
            Event::PlanCompleted { .. } => "plan_completed",
            Event::GraspClosed { .. } => "grasp_closed",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlError {
    #[error("input is not accepted in phase {phase:?}")]
    WrongPhase { phase: Phase },
    #[error("event {event} is not allowed in phase {phase:?}")]
    IllegalTransition { phase: Phase, event: String },
    #[error("no plan or approach pose to guide toward")]
    MissingPlan,
    #[error("input time step must be positive and finite")]
    InvalidInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub phase: Phase,
    pub sub_mode: SubMode,
    pub profile: AutonomyProfile,
    /// Unit direction from the hemisphere center to the end-effector.
    pub direction: Vector3<f64>,
    /// Radians about the approach axis, in `[-π, π)`.
    pub roll: f64,
    pub hemisphere: HemisphereSpec,
    /// Unconstrained end-effector pose of the manual profile.
    pub free_pose: Pose,
    /// Hemisphere pose at the moment the approach was confirmed.
    pub confirmed_pose: Option<Pose>,
    pub plan: Option<PlanResult>,
    /// Pick progress in `[0, 1]`.
    pub progress: f64,
    pub selected_object: usize,
    /// Grasp verdict once `Done`.
    pub outcome: Option<bool>,
    pub retries: u32,
}

impl SessionState {
    /// A session at object selection, hovering over the pole.
    pub fn new(hemisphere: HemisphereSpec, profile: AutonomyProfile, selected_object: usize) -> Self {
        let direction = hemisphere.up_axis.normalize();
        let free_pose = surface_pose(&hemisphere, &direction, 0.0).expect("pole is on the hemisphere");
        Self {
            phase: Phase::ObjectSelect,
            sub_mode: SubMode::Translate,
            profile,
            direction,
            roll: 0.0,
            hemisphere,
            free_pose,
            confirmed_pose: None,
            plan: None,
            progress: 0.0,
            selected_object,
            outcome: None,
            retries: 0,
        }
    }

    /// Constrained pose for the current direction and roll.
    pub fn hemisphere_pose(&self) -> Pose {
        surface_pose(&self.hemisphere, &self.direction, self.roll).expect("direction kept above the base plane")
    }

    /// Where the end-effector is commanded to be.
    pub fn end_effector_pose(&self) -> Pose {
        match self.phase {
            Phase::PickGuidance | Phase::Closing | Phase::Done if self.profile != AutonomyProfile::Manual => {
                guidance_pose(self, self.guidance_mode()).unwrap_or_else(|_| self.hemisphere_pose())
            }
            _ if self.profile == AutonomyProfile::Manual => self.free_pose,
            _ => self.hemisphere_pose(),
        }
    }

    pub fn guidance_mode(&self) -> GuidanceMode {
        match self.profile {
            AutonomyProfile::Planned => GuidanceMode::Planned,
            AutonomyProfile::ScOnly | AutonomyProfile::Manual => GuidanceMode::ScOnly,
        }
    }
}

fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

/// Applies one device sample.
///
/// In the planned profile, progress reaching 1 moves the session on to
/// `Closing`.
pub fn apply_input(state: &SessionState, input: &UserInput, gains: &Gains) -> Result<SessionState, ControlError> {
    if !(input.dt > 0.0 && input.dt.is_finite()) {
        return Err(ControlError::InvalidInput);
    }
    let [dx, dy, dz] = input.clamped_axes();
    let mut next = state.clone();
    match state.phase {
        Phase::HemisphereSelect => {
            if input.toggle_mode {
                next.sub_mode = match state.sub_mode {
                    SubMode::Translate => SubMode::Rotate,
                    SubMode::Rotate => SubMode::Translate,
                };
            }
            if state.profile == AutonomyProfile::Manual {
                next.free_pose = free_step(&state.free_pose, next.sub_mode, [dx, dy, dz], input.dt, gains, state.hemisphere.radius);
            } else {
                match next.sub_mode {
                    SubMode::Translate => next.direction = steer(&state.hemisphere, &state.direction, dx, dy, input.dt * gains.translate),
                    SubMode::Rotate => {
                        if dx != 0.0 {
                            next.roll = wrap_angle(state.roll + gains.rotate * dx * input.dt);
                        }
                    }
                }
            }
        }
        Phase::PickGuidance => {
            if dz != 0.0 {
                next.progress = (state.progress + gains.progress * dz * input.dt).clamp(0.0, 1.0);
            }
            if state.profile == AutonomyProfile::Planned && next.progress >= 1.0 {
                next.phase = Phase::Closing;
            }
        }
        phase => return Err(ControlError::WrongPhase { phase }),
    }
    Ok(next)
}

/// Moves `direction` along the great circle given by the tangent velocity
/// `(dx, dy)`, by `rate·|v|` radians with `|v| ≤ 1`, and clamps it to the
/// base circle.
fn steer(hemi: &HemisphereSpec, direction: &Vector3<f64>, dx: f64, dy: f64, rate: f64) -> Vector3<f64> {
    let (x, y) = tangent_basis(direction, &hemi.up_axis);
    let v = x * dx + y * dy;
    let speed = v.norm();
    if speed == 0.0 || rate == 0.0 {
        return *direction;
    }
    let angle = rate * speed.min(1.0);
    let t = v / speed;
    let mut d = (direction * angle.cos() + t * angle.sin()).normalize();
    let up = hemi.up_axis.normalize();
    let h = d.dot(&up);
    if h < 0.0 {
        let flat = d - up * h;
        let n = flat.norm();
        d = if n > 1e-12 { flat / n } else { *direction };
    }
    d
}

fn free_step(pose: &Pose, mode: SubMode, axes: [f64; 3], dt: f64, gains: &Gains, radius: f64) -> Pose {
    let v = Vector3::from(axes);
    if v == Vector3::zeros() {
        return *pose;
    }
    match mode {
        SubMode::Translate => pose.translated(&(pose.orientation * v * (gains.translate * radius * dt))),
        SubMode::Rotate => {
            let w = v * (gains.rotate * dt);
            let delta = UnitQuaternion::from_scaled_axis(w);
            Pose::new(pose.position, pose.orientation * delta)
        }
    }
}

/// Applies an event, returning every state passed through; `Retry` hands
/// straight back to `HemisphereSelect`.
pub fn advance_path(state: &SessionState, event: &Event) -> Result<Vec<SessionState>, ControlError> {
    let illegal = || ControlError::IllegalTransition {
        phase: state.phase,
        event: event.name().to_string(),
    };
    let mut next = state.clone();
    if let Event::Cancel = event {
        next.phase = Phase::HemisphereSelect;
        next.plan = None;
        next.progress = 0.0;
        next.confirmed_pose = None;
        next.outcome = None;
        return Ok(vec![next]);
    }
    match (state.phase, event) {
        (Phase::ObjectSelect, Event::Confirm) => next.phase = Phase::HemisphereSelect,
        (Phase::HemisphereSelect, Event::Confirm) => {
            next.confirmed_pose = Some(state.end_effector_pose());
            next.progress = 0.0;
            next.phase = match state.profile {
                AutonomyProfile::Planned => Phase::Planning,
                AutonomyProfile::ScOnly => Phase::PickGuidance,
                AutonomyProfile::Manual => Phase::Closing,
            };
        }
        (Phase::Planning, Event::PlanCompleted { plan }) => {
            if plan.best.is_some() {
                next.plan = Some((**plan).clone());
                next.progress = 0.0;
                next.phase = Phase::PickGuidance;
            } else {
                next.plan = Some((**plan).clone());
                next.phase = Phase::Retry;
                next.retries += 1;
                let mut back = next.clone();
                back.phase = Phase::HemisphereSelect;
                back.confirmed_pose = None;
                return Ok(vec![next, back]);
            }
        }
        (Phase::PickGuidance, Event::Confirm) => {
            if state.profile == AutonomyProfile::Planned && state.progress < 1.0 {
                return Err(illegal());
            }
            next.phase = Phase::Closing;
        }
        (Phase::Closing, Event::GraspClosed { success }) => {
            next.outcome = Some(*success);
            next.phase = Phase::Done;
        }
        _ => return Err(illegal()),
    }
    Ok(vec![next])
}

/// The state after `event`.
pub fn advance_state(state: &SessionState, event: &Event) -> Result<SessionState, ControlError> {
    Ok(advance_path(state, event)?.pop().expect("at least one state"))
}

/// Commanded pose at pick progress `state.progress`.
///
/// Planned: from the confirmed pose to the best candidate's backed-off
/// grasp pose, positions linearly and orientations by slerp. Shared-control
/// only: along the segment to the hemisphere origin at fixed orientation.
pub fn guidance_pose(state: &SessionState, mode: GuidanceMode) -> Result<Pose, ControlError> {
    let start = state.confirmed_pose.ok_or(ControlError::MissingPlan)?;
    let s = state.progress.clamp(0.0, 1.0);
    match mode {
        GuidanceMode::Planned => {
            let best = state
                .plan
                .as_ref()
                .and_then(|p| p.best_candidate())
                .ok_or(ControlError::MissingPlan)?;
            Ok(start.interpolate(&best.hand_pose_at_grasp, s))
        }
        GuidanceMode::ScOnly => Ok(start.translated(&((state.hemisphere.center - start.position) * s))),
    }
}

/// Places the hemisphere pose at `direction`; `None` when the direction is
/// zero or below the base plane.
pub fn set_direction(state: &SessionState, direction: &Vector3<f64>) -> Option<SessionState> {
    let d = Unit::try_new(*direction, 1e-12)?.into_inner();
    if !state.hemisphere.direction_is_valid(&d) {
        return None;
    }
    let mut next = state.clone();
    next.direction = d;
    Some(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{hemisphere_for, primitives, GraspMode, DEFAULT_CLEARANCE};
    use crate::planner::PlanTiming;
    use crate::sim::{CandidateStatus, GraspCandidate};
    use proptest::prelude::*;

    fn hemi(mode: GraspMode) -> HemisphereSpec {
        let can = primitives::cylinder(0.034, 0.1, 16);
        hemisphere_for(&can, &Pose::from_translation(Vector3::new(0.0, 0.0, 0.05)), 0.0, mode, DEFAULT_CLEARANCE).unwrap()
    }

    fn selecting(profile: AutonomyProfile) -> SessionState {
        advance_state(&SessionState::new(hemi(GraspMode::Power), profile, 0), &Event::Confirm).unwrap()
    }

    fn plan_with(best: bool) -> PlanResult {
        let mut c = GraspCandidate::unsimulated(Pose::identity(), 0.1, CandidateStatus::Success);
        c.hand_pose_at_grasp = Pose::from_translation(Vector3::new(0.0, 0.0, 0.2));
        PlanResult {
            mode: GraspMode::Power,
            candidates: vec![c],
            best: best.then_some(0),
            timing: PlanTiming {
                wall_seconds: 0.0,
                workers: 1,
            },
        }
    }

    fn on_hemisphere(s: &SessionState) -> bool {
        let p = s.hemisphere_pose();
        let to_center = (s.hemisphere.center - p.position).normalize();
        s.hemisphere.radial_error(&p.position) < 1e-9
            && (p.approach_axis() - to_center).norm() < 1e-9
            && s.direction.dot(&s.hemisphere.up_axis) >= -1e-12
    }

    #[test]
    fn zero_input_is_a_fixed_point() {
        for profile in [AutonomyProfile::Planned, AutonomyProfile::Manual] {
            let s = selecting(profile);
            for dt in [1e-3, 0.05, 10.0] {
                assert_eq!(apply_input(&s, &UserInput::axes(0.0, 0.0, 0.0, dt), &Gains::default()).unwrap(), s);
            }
        }
    }

    #[test]
    fn steering_toward_the_equator_stops_at_the_base_circle() {
        let mut s = selecting(AutonomyProfile::Planned);
        // +x of the tangent basis points toward the pole.
        s = apply_input(&s, &UserInput::axes(0.0, 1.0, 0.0, 0.1), &Gains::default()).unwrap();
        for _ in 0..2000 {
            s = apply_input(&s, &UserInput::axes(-1.0, 0.0, 0.0, 0.05), &Gains::default()).unwrap();
            assert!(on_hemisphere(&s));
        }
        assert!(s.direction.z.abs() < 1e-9);
    }

    #[test]
    fn translate_keeps_roll_and_rotate_keeps_position() {
        let s = selecting(AutonomyProfile::Planned);
        let moved = apply_input(&s, &UserInput::axes(0.3, -0.8, 0.0, 0.1), &Gains::default()).unwrap();
        assert_eq!(moved.roll, s.roll);
        assert!(moved.direction != s.direction);
        let mut toggle = UserInput::axes(0.7, 0.4, 0.0, 0.1);
        toggle.toggle_mode = true;
        let rolled = apply_input(&moved, &toggle, &Gains::default()).unwrap();
        assert_eq!(rolled.sub_mode, SubMode::Rotate);
        assert_eq!(rolled.direction, moved.direction);
        assert!((rolled.roll - 0.07).abs() < 1e-12);
    }

    #[test]
    fn transitions_of_the_planned_flow() {
        let s = selecting(AutonomyProfile::Planned);
        assert_eq!(s.phase, Phase::HemisphereSelect);
        let planning = advance_state(&s, &Event::Confirm).unwrap();
        assert_eq!(planning.phase, Phase::Planning);
        let path = advance_path(&planning, &Event::PlanCompleted { plan: Box::new(plan_with(false)) }).unwrap();
        assert_eq!(path.iter().map(|x| x.phase).collect::<Vec<_>>(), vec![Phase::Retry, Phase::HemisphereSelect]);
        assert_eq!(path[1].direction, s.direction);
        assert_eq!(path[1].roll, s.roll);
        let guided = advance_state(&planning, &Event::PlanCompleted { plan: Box::new(plan_with(true)) }).unwrap();
        assert_eq!((guided.phase, guided.progress), (Phase::PickGuidance, 0.0));
        assert!(advance_state(&guided, &Event::Confirm).is_err());
        let mut g = guided.clone();
        for _ in 0..40 {
            g = apply_input(&g, &UserInput::axes(0.0, 0.0, 1.0, 0.1), &Gains::default()).unwrap();
        }
        assert_eq!(g.phase, Phase::Closing);
        let done = advance_state(&g, &Event::GraspClosed { success: true }).unwrap();
        assert_eq!((done.phase, done.outcome), (Phase::Done, Some(true)));
        let first = SessionState::new(hemi(GraspMode::Power), AutonomyProfile::Planned, 0);
        assert_eq!(
            advance_state(&first, &Event::GraspClosed { success: true }),
            Err(ControlError::IllegalTransition {
                phase: Phase::ObjectSelect,
                event: "grasp_closed".into()
            })
        );
    }

    #[test]
    fn apply_input_outside_steering_phases_is_wrong_phase() {
        let s = SessionState::new(hemi(GraspMode::Power), AutonomyProfile::Planned, 0);
        assert_eq!(
            apply_input(&s, &UserInput::axes(1.0, 0.0, 0.0, 0.1), &Gains::default()),
            Err(ControlError::WrongPhase { phase: Phase::ObjectSelect })
        );
        let sel = selecting(AutonomyProfile::Planned);
        assert_eq!(
            apply_input(&sel, &UserInput::axes(1.0, 0.0, 0.0, 0.0), &Gains::default()),
            Err(ControlError::InvalidInput)
        );
    }

    #[test]
    fn guidance_endpoints() {
        let sel = selecting(AutonomyProfile::Planned);
        let planning = advance_state(&sel, &Event::Confirm).unwrap();
        let mut g = advance_state(&planning, &Event::PlanCompleted { plan: Box::new(plan_with(true)) }).unwrap();
        assert_eq!(guidance_pose(&g, GuidanceMode::Planned).unwrap(), sel.hemisphere_pose());
        g.progress = 1.0;
        assert_eq!(guidance_pose(&g, GuidanceMode::Planned).unwrap(), Pose::from_translation(Vector3::new(0.0, 0.0, 0.2)));
        g.progress = 0.5;
        let mid = guidance_pose(&g, GuidanceMode::ScOnly).unwrap();
        let start = sel.hemisphere_pose();
        assert!((mid.position - (start.position + sel.hemisphere.center) * 0.5).norm() < 1e-12);
        assert_eq!(mid.orientation, start.orientation);
        assert_eq!(guidance_pose(&sel, GuidanceMode::ScOnly), Err(ControlError::MissingPlan));
        let mut bare = g.clone();
        bare.plan = None;
        assert_eq!(guidance_pose(&bare, GuidanceMode::Planned), Err(ControlError::MissingPlan));
    }

    #[test]
    fn guidance_is_continuous_in_progress() {
        let sel = selecting(AutonomyProfile::Planned);
        let mut turned = sel.clone();
        turned.roll = 2.5;
        let planning = advance_state(&turned, &Event::Confirm).unwrap();
        let mut g = advance_state(&planning, &Event::PlanCompleted { plan: Box::new(plan_with(true)) }).unwrap();
        let mut last = guidance_pose(&g, GuidanceMode::Planned).unwrap();
        for k in 1..=1000 {
            g.progress = k as f64 * 1e-3;
            let p = guidance_pose(&g, GuidanceMode::Planned).unwrap();
            assert!((p.position - last.position).norm() < 1e-3);
            assert!(p.orientation.angle_to(&last.orientation) < 1e-2);
            last = p;
        }
    }

    fn any_event() -> impl Strategy<Value = Event> {
        prop_oneof![
            Just(Event::Confirm),
            Just(Event::Cancel),
            any::<bool>().prop_map(|b| Event::PlanCompleted { plan: Box::new(plan_with(b)) }),
            any::<bool>().prop_map(|success| Event::GraspClosed { success }),
        ]
    }

    #[test]
    fn transition_table_is_total() {
        let events = [
            Event::Confirm,
            Event::Cancel,
            Event::PlanCompleted { plan: Box::new(plan_with(true)) },
            Event::PlanCompleted { plan: Box::new(plan_with(false)) },
            Event::GraspClosed { success: false },
        ];
        for profile in [AutonomyProfile::Manual, AutonomyProfile::ScOnly, AutonomyProfile::Planned] {
            for phase in Phase::ALL {
                for progress in [0.0, 1.0] {
                    let mut s = SessionState::new(hemi(GraspMode::Power), profile, 0);
                    s.phase = phase;
                    s.progress = progress;
                    for e in &events {
                        match advance_path(&s, e) {
                            Ok(path) => assert!(path.iter().all(|x| x.phase != Phase::Retry) || path.len() == 2),
                            Err(ControlError::IllegalTransition { phase: p, .. }) => assert_eq!(p, phase),
                            Err(other) => panic!("{other:?}"),
                        }
                    }
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn random_sessions_stay_on_the_hemisphere(
            steps in proptest::collection::vec(
                (-1.5f64..1.5, -1.5f64..1.5, -1.5f64..1.5, any::<bool>(), 0.001f64..0.2, proptest::option::weighted(0.05, any_event())),
                1..300,
            ),
            power in any::<bool>(),
        ) {
            let mode = if power { GraspMode::Power } else { GraspMode::Precision };
            let mut s = advance_state(&SessionState::new(hemi(mode), AutonomyProfile::Planned, 0), &Event::Confirm).unwrap();
            for (dx, dy, dz, toggle, dt, event) in steps {
                let mut input = UserInput::axes(dx, dy, dz, dt);
                input.toggle_mode = toggle;
                match apply_input(&s, &input, &Gains::default()) {
                    Ok(n) => s = n,
                    Err(e) => prop_assert!(matches!(e, ControlError::WrongPhase { .. }), "{:?}", e),
                }
                if let Some(e) = event {
                    match advance_state(&s, &e) {
                        Ok(n) => s = n,
                        Err(e) => prop_assert!(matches!(e, ControlError::IllegalTransition { .. }), "{:?}", e),
                    }
                }
                prop_assert!(on_hemisphere(&s));
                prop_assert!((0.0..=1.0).contains(&s.progress));
                prop_assert!(s.phase != Phase::Retry);
            }
        }
    }
}
