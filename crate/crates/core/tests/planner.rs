mod oracle;

use hemigrasp_core::geometry::{hemisphere_for, primitives, surface_pose, GraspMode, Pose, DEFAULT_CLEARANCE};
use hemigrasp_core::hand::builtin_hand;
use hemigrasp_core::planner::{plan, select_mode, PlanResult, SamplingSpec, DEFAULT_MODE_THRESHOLD};
use hemigrasp_core::quality::wrench_set;
use hemigrasp_core::sim::{CandidateStatus, PhysicsParams, Scene, SimParams};
use nalgebra::{UnitQuaternion, Vector3};
use oracle::{epsilon_by_support_sweep, Directions};

fn can_scene() -> Scene {
    let can = primitives::cylinder(0.034, 0.10, 32);
    let pose = Pose::new(Vector3::new(0.05, -0.03, 0.05), UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 0.4));
    Scene::new(can, pose, PhysicsParams::default(), 0.0).unwrap()
}

fn run(scene: &Scene, mode: GraspMode, direction: Vector3<f64>, spec: &SamplingSpec, workers: usize) -> PlanResult {
    let hemi = hemisphere_for(&scene.object_mesh, &scene.object_pose, 0.0, mode, DEFAULT_CLEARANCE).unwrap();
    let user = surface_pose(&hemi, &direction, 0.3).unwrap();
    plan(scene, &builtin_hand("three_finger").unwrap(), &user, &hemi, spec, &SimParams::default(), workers).unwrap()
}

#[test]
fn best_is_the_oracle_maximum_over_successes() {
    let scene = can_scene();
    let mode = select_mode(scene.object_height(), DEFAULT_MODE_THRESHOLD);
    let r = run(&scene, mode, Vector3::z(), &SamplingSpec::default(), 1);
    assert_eq!(r.candidates.len(), 25 * 2);
    let dirs = Directions::new(100_000, 4);
    let mut oracle_best = (0.0, usize::MAX);
    for (i, c) in r.candidates.iter().enumerate() {
        if c.status != CandidateStatus::Success {
            continue;
        }
        let ws = wrench_set(&c.object_contacts(), 8, scene.torque_scale(), &scene.reference()).unwrap();
        let o = epsilon_by_support_sweep(&ws.wrenches, &dirs, i as u64);
        assert!((o - c.epsilon).abs() <= 1e-6_f64.max(0.01 * o), "candidate {i}: {} vs {o}", c.epsilon);
        if o > oracle_best.0 {
            oracle_best = (o, i);
        }
    }
    let best = r.best_candidate().expect("a successful grasp");
    assert_eq!(best.status, CandidateStatus::Success);
    assert!((best.epsilon - oracle_best.0).abs() <= 0.01 * oracle_best.0);
    for c in &r.candidates {
        if c.status == CandidateStatus::Success {
            assert!(best.epsilon >= c.epsilon);
        }
    }
}

#[test]
fn worker_count_does_not_change_the_result() {
    let scene = can_scene();
    let d = Vector3::new(0.3, 0.1, 1.0).normalize();
    let one = run(&scene, GraspMode::Precision, d, &SamplingSpec::default(), 1);
    let eight = run(&scene, GraspMode::Precision, d, &SamplingSpec::default(), 8);
    assert!(one.same_outcome(&eight));
    assert_eq!(eight.timing.workers, 8);
}

#[test]
fn candidates_respect_the_sampling_invariants() {
    let scene = can_scene();
    let el = 4f64.to_radians();
    let spec = SamplingSpec::wide();
    let r = run(&scene, GraspMode::Power, Vector3::new(el.cos(), 0.0, el.sin()), &spec, 2);
    let hemi = hemisphere_for(&scene.object_mesh, &scene.object_pose, 0.0, GraspMode::Power, DEFAULT_CLEARANCE).unwrap();
    let flexions = spec.flexions_for(GraspMode::Power);
    assert!(r.candidates.len() <= (spec.n_circumferences * spec.points_per_circumference + 1) * flexions.len());
    assert!(r.candidates.iter().any(|c| c.status == CandidateStatus::FilteredBelowSurface));
    let mut last = (f64::MIN, 0usize, f64::MIN);
    for c in &r.candidates {
        assert!(c.angular_offset <= spec.angle_max + 1e-9);
        let key = (c.angular_offset, c.azimuth_index.map_or(0, |a| a + 1), c.flexion);
        assert!(key >= last, "canonical order");
        last = key;
        if c.status == CandidateStatus::FilteredBelowSurface {
            assert!(c.contacts.is_empty() && c.epsilon == 0.0);
            continue;
        }
        assert!(hemi.radial_error(&c.approach_pose.position) < 1e-9);
        let inward = (hemi.center - c.approach_pose.position).normalize();
        assert!(c.approach_pose.approach_axis().cross(&inward).norm() < 1e-9 && c.approach_pose.approach_axis().dot(&inward) > 0.0);
        assert!(c.epsilon == 0.0 || matches!(c.status, CandidateStatus::Success | CandidateStatus::Unstable));
        if c.status == CandidateStatus::Success {
            assert!(c.object_contacts().len() >= 2);
        }
    }
}

#[test]
fn plan_result_round_trips_through_json() {
    let r = run(&can_scene(), GraspMode::Precision, Vector3::z(), &SamplingSpec::default(), 1);
    let text = serde_json::to_string(&r).unwrap();
    let back: PlanResult = serde_json::from_str(&text).unwrap();
    assert_eq!(back, r);
}
