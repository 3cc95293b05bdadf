//! Headless benchmark harness: scripted users grasping objects at random
//! poses, and the same under reconstruction-like mesh perturbation.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use hemigrasp_core::control::{AutonomyProfile, Phase, UserInput};
use hemigrasp_core::geometry::{
    chamfer_l1, perturb_mesh, primitives, volumetric_iou_default, ConvexPart, GraspMode, Pose, TriMesh,
};
use hemigrasp_core::hand::HandModel;
use hemigrasp_core::planner::{flexion_set, SamplingSpec};
use hemigrasp_core::sim::{approach_until_contact, collision_parts, GraspStatus, PhysicsParams, Scene, SimParams};
use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{SessionConfig, SessionEngine};
use crate::protocol::ClientMessage;
use crate::record::{FailureReason, LogError, Operator, TrialLog, TrialRecord};

/// Object placement region on the support plane, m (an A4 sheet).
pub const REGION: (f64, f64) = (0.297, 0.210);
/// Input period of the scripted users, s.
pub const INPUT_DT: f64 = 0.05;
/// Lowest approach elevation of the random policy, degrees.
pub const MIN_ELEVATION_DEG: f64 = 30.0;
const CHAMFER_SAMPLES: usize = 5000;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("no readable objects")]
    NoObjects,
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("cannot read {path}: {message}")]
    Unreadable { path: PathBuf, message: String },
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("report {path}: {message}")]
    Report { path: PathBuf, message: String },
    #[error("session: {0}")]
    Session(String),
}

/// Stand-in for the human choosing the approach.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    /// Straight down from the pole.
    TopDown,
    /// Uniform over directions at least 30° above the base, random roll.
    RandomUpper,
    /// Replays recorded client frames.
    Scripted(Vec<ClientMessage>),
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::TopDown => "top_down",
            Policy::RandomUpper => "random_upper",
            Policy::Scripted(_) => "scripted",
        }
    }

    /// `top_down`, `random_upper`, or the path of a JSON-lines file of
    /// client frames.
    pub fn parse(arg: &str) -> Result<Policy, BenchError> {
        match arg {
            "top_down" => Ok(Policy::TopDown),
            "random_upper" => Ok(Policy::RandomUpper),
            path => Policy::load_script(Path::new(path)),
        }
    }

    pub fn load_script(path: &Path) -> Result<Policy, BenchError> {
        let unreadable = |message: String| BenchError::Unreadable {
            path: path.to_path_buf(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| unreadable(e.to_string()))?;
        let frames = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| unreadable(format!("frame {}: {e}", i + 1))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Policy::Scripted(frames))
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub trials: usize,
    pub policy: Policy,
    pub profile: AutonomyProfile,
    pub seed: u64,
    pub workers: usize,
    pub hand: Arc<HandModel>,
    pub sampling: SamplingSpec,
    pub sim: SimParams,
    pub physics: PhysicsParams,
}

impl BenchConfig {
    pub fn new(hand: HandModel, policy: Policy, profile: AutonomyProfile, trials: usize, seed: u64) -> Self {
        Self {
            trials,
            policy,
            profile,
            seed,
            workers: 1,
            hand: Arc::new(hand),
            sampling: SamplingSpec::default(),
            sim: SimParams::default(),
            physics: PhysicsParams::default(),
        }
    }
}

/// Object mesh with its collision geometry, both in the object frame.
#[derive(Debug, Clone)]
pub struct BenchObject {
    pub id: String,
    pub mesh: TriMesh,
    pub parts: Vec<ConvexPart>,
}

impl BenchObject {
    pub fn new(id: impl Into<String>, mesh: TriMesh) -> Result<Self, BenchError> {
        let id = id.into();
        let parts = collision_parts(&mesh).map_err(|e| BenchError::Unreadable {
            path: PathBuf::from(&id),
            message: e.to_string(),
        })?;
        Ok(Self { id, mesh, parts })
    }

    /// Scene with the object resting on the plane `z = 0` at `(x, y, yaw)`.
    fn scene(&self, placement: &Placement, physics: PhysicsParams) -> Scene {
        scene_on_plane(&self.mesh, &self.parts, placement, physics, 0.0)
    }
}

fn scene_on_plane(mesh: &TriMesh, parts: &[ConvexPart], at: &Placement, physics: PhysicsParams, support: f64) -> Scene {
    let rot = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), at.yaw);
    let min_z = mesh.aabb().map_or(0.0, |b| b.min.z);
    let pose = Pose::new(Vector3::new(at.x, at.y, support - min_z), rot);
    Scene::with_parts(mesh.clone(), parts.to_vec(), pose, physics, support).expect("object placed on the support")
}

/// The five desk objects: a box, two cans and two spheres.
pub fn desk_objects() -> Vec<(String, TriMesh)> {
    vec![
        ("box".into(), primitives::cuboid(Vector3::new(0.06, 0.16, 0.21))),
        ("can_small".into(), primitives::cylinder(0.034, 0.10, 48)),
        ("can_tall".into(), primitives::cylinder(0.04, 0.23, 48)),
        ("sphere".into(), primitives::icosphere(0.048, 3)),
        ("sphere_small".into(), primitives::icosphere(0.025, 3)),
    ]
}

/// Loads every `.obj` and `.stl` in `dir`, sorted by file name. Unreadable
/// files are skipped with a warning.
pub fn load_objects(dir: &Path) -> Result<Vec<BenchObject>, BenchError> {
    let entries = std::fs::read_dir(dir).map_err(|e| BenchError::Unreadable {
        path: dir.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("obj") || e.eq_ignore_ascii_case("stl"))
        })
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for path in paths {
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("object").to_string();
        match TriMesh::load(&path).map_err(|e| e.to_string()).and_then(|m| {
            BenchObject::new(id.clone(), m).map_err(|e| e.to_string())
        }) {
            Ok(o) => out.push(o),
            Err(e) => tracing::warn!(path = %path.display(), error = %e, "skipping unreadable mesh"),
        }
    }
    if out.is_empty() {
        return Err(BenchError::NoObjects);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Placement {
    x: f64,
    y: f64,
    yaw: f64,
}

/// Generator for one (object, trial) pair, independent of every other pair.
fn trial_rng(seed: u64, object: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((object as u64) << 32) | trial as u64);
    rng
}

fn random_placement(rng: &mut ChaCha8Rng) -> Placement {
    Placement {
        x: rng.random_range(-0.5..0.5) * REGION.0,
        y: rng.random_range(-0.5..0.5) * REGION.1,
        yaw: rng.random_range(0.0..2.0 * PI),
    }
}

/// Approach direction and roll.
fn choose_approach(policy: &Policy, rng: &mut ChaCha8Rng) -> (Vector3<f64>, f64) {
    match policy {
        Policy::RandomUpper => {
            // Uniform on the cap: z uniform in [sin(min elevation), 1].
            let z = rng.random_range(MIN_ELEVATION_DEG.to_radians().sin()..=1.0);
            let phi = rng.random_range(0.0..2.0 * PI);
            let r = (1.0 - z * z).max(0.0).sqrt();
            let roll = rng.random_range(-PI..PI);
            (Vector3::new(r * phi.cos(), r * phi.sin(), z), roll)
        }
        Policy::TopDown | Policy::Scripted(_) => (Vector3::z(), 0.0),
    }
}

fn input(dz: f64, dt: f64) -> ClientMessage {
    ClientMessage::Input(UserInput::axes(0.0, 0.0, dz, dt))
}

fn confirm() -> ClientMessage {
    ClientMessage::Input(UserInput {
        confirm: true,
        dt: INPUT_DT,
        ..UserInput::default()
    })
}

/// Full-deflection inputs covering `amount` at `rate` per second: whole
/// periods, then one shorter remainder.
fn push_inputs(engine: &mut SessionEngine, amount: f64, rate: f64) -> Result<(), BenchError> {
    let step = rate * INPUT_DT;
    let full = (amount / step).floor().max(0.0) as usize;
    for _ in 0..full {
        send(engine, &input(1.0, INPUT_DT))?;
    }
    let rest = (amount - full as f64 * step) / rate;
    if rest > 1e-12 {
        send(engine, &input(1.0, rest))?;
    }
    Ok(())
}

fn send(engine: &mut SessionEngine, msg: &ClientMessage) -> Result<(), BenchError> {
    engine.handle(msg).map_err(|e| BenchError::Session(e.message))?;
    engine.run_pending_plan().map_err(|e| BenchError::Session(e.message))
}

/// Distance from the hemisphere pose to where a user would stop before
/// closing: first contact on the true object, less the back-off margin.
fn stop_distance(engine: &SessionEngine) -> f64 {
    let start = engine.state().hemisphere_pose();
    let (min_contacts, count_world) = match engine.mode() {
        GraspMode::Power => (2, false),
        GraspMode::Precision => (3, true),
    };
    let sim = engine.config().sim;
    let reached = approach_until_contact(
        engine.truth_scene(),
        engine.hand(),
        &start,
        flexion_set(engine.mode())[0],
        min_contacts,
        count_world,
        &sim,
    );
    if reached.status == GraspStatus::ObstacleCollision {
        return 0.0;
    }
    ((reached.hand_pose.position - start.position).norm() - sim.backoff_margin).max(0.0)
}

/// Drives one session to its end with `policy` and returns its record.
pub fn run_session(
    engine: &mut SessionEngine,
    policy: &Policy,
    direction: &Vector3<f64>,
    roll: f64,
) -> Result<TrialRecord, BenchError> {
    if let Policy::Scripted(frames) = policy {
        for f in frames {
            // A rejected frame is what a client would see as an error frame.
            if engine.handle(f).is_ok() {
                engine.run_pending_plan().ok();
            }
            if engine.state().phase == Phase::Done {
                break;
            }
        }
        return Ok(match engine.record() {
            Some(r) => r.clone(),
            None => engine.failure_record(FailureReason::Incomplete),
        });
    }
    send(engine, &confirm())?;
    engine.place(direction, roll).map_err(|e| BenchError::Session(e.message))?;
    let gains = engine.config().gains;
    match engine.state().profile {
        AutonomyProfile::Planned => {
            send(engine, &confirm())?;
            if engine.state().phase != Phase::PickGuidance {
                return Ok(engine.failure_record(FailureReason::NoSuccessfulCandidate));
            }
            while engine.state().phase == Phase::PickGuidance {
                send(engine, &input(1.0, INPUT_DT))?;
            }
        }
        AutonomyProfile::ScOnly => {
            let s = stop_distance(engine) / engine.hemisphere().radius;
            send(engine, &confirm())?;
            push_inputs(engine, s.min(1.0), gains.progress)?;
            send(engine, &confirm())?;
        }
        AutonomyProfile::Manual => {
            let d = stop_distance(engine);
            push_inputs(engine, d, gains.translate * engine.hemisphere().radius)?;
            send(engine, &confirm())?;
        }
    }
    engine
        .record()
        .cloned()
        .ok_or_else(|| BenchError::Session(format!("session ended in {:?}", engine.state().phase)))
}

/// One row of the benchmark report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub object: String,
    pub trials: usize,
    pub successes: usize,
    pub trial_success_rate: f64,
    pub candidates: usize,
    pub simulated: usize,
    pub planner_successes: usize,
    pub planner_success_rate: f64,
    pub eps_mean: f64,
    pub eps_std: f64,
    pub policy_time_s: f64,
    pub pick_time_s: f64,
}

impl ReportRow {
    pub fn from_records(object: &str, records: &[&TrialRecord]) -> Self {
        let trials = records.len();
        let successes = records.iter().filter(|r| r.outcome.is_success()).count();
        let (mut candidates, mut simulated, mut planner_successes) = (0, 0, 0);
        for p in records.iter().filter_map(|r| r.plan.as_ref()) {
            candidates += p.candidates;
            simulated += p.simulated;
            planner_successes += p.successes;
        }
        let eps: Vec<f64> = records.iter().filter_map(|r| r.execution.as_ref().map(|e| e.epsilon)).collect();
        let (eps_mean, eps_std) = mean_std(&eps);
        let mean_of = |f: fn(&TrialRecord) -> f64| {
            if trials == 0 {
                0.0
            } else {
                records.iter().map(|r| f(r)).sum::<f64>() / trials as f64
            }
        };
        Self {
            object: object.to_string(),
            trials,
            successes,
            trial_success_rate: ratio(successes, trials),
            candidates,
            simulated,
            planner_successes,
            planner_success_rate: ratio(planner_successes, simulated),
            eps_mean,
            eps_std,
            policy_time_s: mean_of(|r| r.timings.select),
            pick_time_s: mean_of(|r| r.timings.pick),
        }
    }
}

fn ratio(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

/// Population mean and standard deviation; zeros when empty.
fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanTime {
    pub trial_id: String,
    pub plan_wall_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    /// One row per object, then the pooled `overall` row.
    pub rows: Vec<ReportRow>,
    pub records: Vec<TrialRecord>,
    /// Wall time per planned trial; varies between runs.
    pub plan_times: Vec<PlanTime>,
}

impl BenchReport {
    fn from_records(object_ids: &[String], records: Vec<TrialRecord>, plan_times: Vec<PlanTime>) -> Self {
        let mut rows: Vec<ReportRow> = object_ids
            .iter()
            .map(|id| {
                let rs: Vec<&TrialRecord> = records.iter().filter(|r| &r.object_id == id).collect();
                ReportRow::from_records(id, &rs)
            })
            .collect();
        rows.push(ReportRow::from_records("overall", &records.iter().collect::<Vec<_>>()));
        Self {
            rows,
            records,
            plan_times,
        }
    }

    pub fn overall(&self) -> &ReportRow {
        self.rows.last().expect("overall row")
    }

    /// Writes `out` (CSV report), `out` with extension `trials.jsonl` (trial
    /// log) and `timing.csv` (plan wall times). Existing files are replaced.
    pub fn write(&self, out: &Path) -> Result<(), BenchError> {
        write_csv(out, &self.rows)?;
        let log_path = out.with_extension("trials.jsonl");
        let log = TrialLog::create(&log_path)?;
        for r in &self.records {
            log.append(r)?;
        }
        write_csv(&out.with_extension("timing.csv"), &self.plan_times)
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), BenchError> {
    let err = |message: String| BenchError::Report {
        path: path.to_path_buf(),
        message,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| err(e.to_string()))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| err(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| err(e.to_string()))?;
    }
    w.flush().map_err(|e| err(e.to_string()))
}

fn session_config(cfg: &BenchConfig) -> SessionConfig {
    SessionConfig {
        profile: cfg.profile,
        sampling: cfg.sampling.clone(),
        sim: cfg.sim,
        workers: cfg.workers,
        ..SessionConfig::default()
    }
}

fn run_trial(
    cfg: &BenchConfig,
    object_id: &str,
    trial_id: String,
    plan_scene: Scene,
    truth_scene: Scene,
    rng: &mut ChaCha8Rng,
) -> Result<(TrialRecord, Option<PlanTime>), BenchError> {
    let mut engine = SessionEngine::new(
        trial_id.clone(),
        object_id,
        Arc::new(plan_scene),
        Arc::new(truth_scene),
        cfg.hand.clone(),
        session_config(cfg),
    )
    .map_err(|e| BenchError::Session(e.message))?
    .with_operator(trial_id.clone(), Operator::Policy(cfg.policy.name().into()));
    let (direction, roll) = choose_approach(&cfg.policy, rng);
    let mut record = run_session(&mut engine, &cfg.policy, &direction, roll)?;
    let plan_time = record.timings.plan.take().map(|plan_wall_s| PlanTime { trial_id, plan_wall_s });
    Ok((record, plan_time))
}

/// Runs `trials` randomized trials per object. Reports and logs are
/// identical for identical inputs; only the plan wall times vary.
pub fn bench_run(objects: &[BenchObject], cfg: &BenchConfig) -> Result<BenchReport, BenchError> {
    if objects.is_empty() {
        return Err(BenchError::NoObjects);
    }
    if cfg.trials == 0 {
        return Err(BenchError::NoTrials);
    }
    let mut records = Vec::new();
    let mut plan_times = Vec::new();
    for (oi, object) in objects.iter().enumerate() {
        for t in 0..cfg.trials {
            let mut rng = trial_rng(cfg.seed, oi, t);
            let placement = random_placement(&mut rng);
            let scene = object.scene(&placement, cfg.physics);
            let trial_id = format!("{}-{t:03}", object.id);
            let (record, time) = run_trial(cfg, &object.id, trial_id, scene.clone(), scene, &mut rng)?;
            tracing::debug!(trial = %record.trial_id, outcome = ?record.outcome, "trial finished");
            records.push(record);
            plan_times.extend(time);
        }
    }
    let ids: Vec<String> = objects.iter().map(|o| o.id.clone()).collect();
    Ok(BenchReport::from_records(&ids, records, plan_times))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbRow {
    pub sigma_mm: f64,
    pub iou: f64,
    pub chamfer_m: f64,
    pub trials: usize,
    pub successes: usize,
    pub trial_success_rate: f64,
    pub planner_success_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbReport {
    pub rows: Vec<PerturbRow>,
    pub records: Vec<TrialRecord>,
    pub plan_times: Vec<PlanTime>,
}

impl PerturbReport {
    /// Same file layout as [`BenchReport::write`].
    pub fn write(&self, out: &Path) -> Result<(), BenchError> {
        write_csv(out, &self.rows)?;
        let log = TrialLog::create(&out.with_extension("trials.jsonl"))?;
        for r in &self.records {
            log.append(r)?;
        }
        write_csv(&out.with_extension("timing.csv"), &self.plan_times)
    }
}

/// For each sigma (mm): perturbs the object, plans on the perturbed mesh
/// and judges the executed grasp on the original. Trial poses are the same
/// for every sigma.
pub fn bench_perturb(object: &BenchObject, sigmas_mm: &[f64], cfg: &BenchConfig) -> Result<PerturbReport, BenchError> {
    if cfg.trials == 0 {
        return Err(BenchError::NoTrials);
    }
    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut plan_times = Vec::new();
    for &sigma in sigmas_mm {
        let perturbed = perturb_mesh(&object.mesh, sigma * 1e-3, cfg.seed);
        let parts = if sigma > 0.0 {
            collision_parts(&perturbed).map_err(|e| BenchError::Session(e.to_string()))?
        } else {
            object.parts.clone()
        };
        let iou = volumetric_iou_default(&object.mesh, &perturbed).map_err(|e| BenchError::Session(e.to_string()))?;
        let chamfer =
            chamfer_l1(&object.mesh, &perturbed, CHAMFER_SAMPLES, cfg.seed).map_err(|e| BenchError::Session(e.to_string()))?;
        let mut sigma_records = Vec::new();
        for t in 0..cfg.trials {
            let mut rng = trial_rng(cfg.seed, 0, t);
            let placement = random_placement(&mut rng);
            let truth = object.scene(&placement, cfg.physics);
            // The perturbed surface may dip below the true bottom; the
            // planner's support plane follows it.
            let dip = perturbed.aabb().map_or(0.0, |b| b.min.z) - object.mesh.aabb().map_or(0.0, |b| b.min.z);
            let plan_scene = Scene::with_parts(perturbed.clone(), parts.clone(), truth.object_pose, cfg.physics, dip.min(0.0))
                .expect("object above its support");
            let trial_id = format!("{}-s{sigma}-{t:03}", object.id);
            let (record, time) = run_trial(cfg, &object.id, trial_id, plan_scene, truth, &mut rng)?;
            sigma_records.push(record);
            plan_times.extend(time);
        }
        let row = ReportRow::from_records(&object.id, &sigma_records.iter().collect::<Vec<_>>());
        rows.push(PerturbRow {
            sigma_mm: sigma,
            iou,
            chamfer_m: chamfer,
            trials: row.trials,
            successes: row.successes,
            trial_success_rate: row.trial_success_rate,
            planner_success_rate: row.planner_success_rate,
        });
        records.extend(sigma_records);
    }
    Ok(PerturbReport {
        rows,
        records,
        plan_times,
    })
}
