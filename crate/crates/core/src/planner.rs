//! Grasp mode selection, local approach sampling around the user's pose and
//! parallel candidate evaluation.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{frame_for_direction, surface_pose, tangent_basis, GraspMode, HemisphereSpec, Pose};
use crate::hand::HandModel;
use crate::sim::{simulate_grasp, CandidateStatus, GraspCandidate, Scene, SimParams};

/// Objects at least this tall are grasped with a power grasp, m.
pub const DEFAULT_MODE_THRESHOLD: f64 = 0.08;
/// Distance from the hemisphere tolerated for the user's pose, m.
const ON_SPHERE_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("user pose is {0} m off the hemisphere")]
    UserPoseOffSphere(f64),
    #[error("invalid sampling spec: {0}")]
    InvalidSpec(String),
    #[error("worker count must be at least 1")]
    NoWorkers,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingSpec {
    pub n_circumferences: usize,
    /// Degrees.
    pub angle_min: f64,
    /// Degrees.
    pub angle_max: f64,
    pub points_per_circumference: usize,
    /// Replaces the mode's default flexion set when present.
    pub flexions: Option<Vec<f64>>,
    pub include_user_pose: bool,
    pub preserve_user_roll: bool,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        Self {
            n_circumferences: 3,
            angle_min: 0.0,
            angle_max: 10.0,
            points_per_circumference: 8,
            flexions: None,
            include_user_pose: true,
            preserve_user_roll: true,
        }
    }
}

impl SamplingSpec {
    /// Wider search for imprecise users: offsets up to 30°.
    pub fn wide() -> Self {
        Self {
            angle_max: 30.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        if !(0.0 <= self.angle_min && self.angle_min < self.angle_max && self.angle_max <= 90.0) {
            return Err(PlanError::InvalidSpec("need 0 <= angle_min < angle_max <= 90".into()));
        }
        if let Some(f) = &self.flexions {
            if f.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(PlanError::InvalidSpec("flexions must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }

    pub fn flexions_for(&self, mode: GraspMode) -> Vec<f64> {
        self.flexions.clone().unwrap_or_else(|| flexion_set(mode))
    }
}

/// Power iff `object_height ≥ threshold`.
pub fn select_mode(object_height: f64, threshold: f64) -> GraspMode {
    if object_height >= threshold {
        GraspMode::Power
    } else {
        GraspMode::Precision
    }
}

pub fn flexion_set(mode: GraspMode) -> Vec<f64> {
    match mode {
        GraspMode::Power => vec![0.0, 0.1],
        GraspMode::Precision => vec![0.1, 0.2, 0.25, 0.3, 0.35],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproachSample {
    pub pose: Pose,
    /// Degrees from the user's approach direction.
    pub angular_offset: f64,
    pub azimuth_index: Option<usize>,
    /// Direction below the hemisphere base: not simulated.
    pub filtered: bool,
}

/// Approach poses on circles around the user's direction, in canonical
/// order: the user's pose, then by circle and azimuth.
pub fn sample_approaches(
    user_pose: &Pose,
    hemi: &HemisphereSpec,
    spec: &SamplingSpec,
) -> Result<Vec<ApproachSample>, PlanError> {
    spec.validate()?;
    let off = hemi.radial_error(&user_pose.position);
    if off > ON_SPHERE_TOL {
        return Err(PlanError::UserPoseOffSphere(off));
    }
    let user_dir = hemi.direction_of(&user_pose.position);
    let roll = if spec.preserve_user_roll {
        hemi.roll_of(user_pose)
    } else {
        0.0
    };
    let mut out = Vec::with_capacity(1 + spec.n_circumferences * spec.points_per_circumference);
    if spec.include_user_pose {
        out.push(sample(hemi, &user_dir, roll, 0.0, None));
    }
    let (x, y) = tangent_basis(&user_dir, &hemi.up_axis);
    for i in 1..=spec.n_circumferences {
        let offset = spec.angle_min + (spec.angle_max - spec.angle_min) * i as f64 / spec.n_circumferences as f64;
        let (st, ct) = offset.to_radians().sin_cos();
        for k in 0..spec.points_per_circumference {
            let phi = 2.0 * PI * k as f64 / spec.points_per_circumference as f64;
            let d = (user_dir * ct + (x * phi.cos() + y * phi.sin()) * st).normalize();
            out.push(sample(hemi, &d, roll, offset, Some(k)));
        }
    }
    Ok(out)
}

fn sample(hemi: &HemisphereSpec, d: &Vector3<f64>, roll: f64, offset: f64, azimuth: Option<usize>) -> ApproachSample {
    match surface_pose(hemi, d, roll) {
        Ok(pose) => ApproachSample {
            pose,
            angular_offset: offset,
            azimuth_index: azimuth,
            filtered: false,
        },
        Err(_) => ApproachSample {
            pose: Pose::new(hemi.center + d * hemi.radius, frame_for_direction(d, &hemi.up_axis, roll)),
            angular_offset: offset,
            azimuth_index: azimuth,
            filtered: true,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanTiming {
    pub wall_seconds: f64,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub mode: GraspMode,
    pub candidates: Vec<GraspCandidate>,
    /// Index into `candidates`.
    pub best: Option<usize>,
    pub timing: PlanTiming,
}

impl PlanResult {
    pub fn best_candidate(&self) -> Option<&GraspCandidate> {
        self.best.map(|i| &self.candidates[i])
    }

    pub fn simulated_count(&self) -> usize {
        self.candidates
            .iter()
            .filter(|c| c.status != CandidateStatus::FilteredBelowSurface)
            .count()
    }

    pub fn success_count(&self) -> usize {
        self.candidates
            .iter()
            .filter(|c| c.status == CandidateStatus::Success)
            .count()
    }

    /// Equality of everything except timing.
    pub fn same_outcome(&self, other: &PlanResult) -> bool {
        self.mode == other.mode && self.candidates == other.candidates && self.best == other.best
    }
}

/// Evaluates every (approach, flexion) pair on `worker_count` threads and
/// picks the successful candidate with the largest ε.
///
/// Ties on ε go to the smaller angular offset, then the smaller flexion.
/// The result does not depend on the worker count.
pub fn plan(
    scene: &Scene,
    hand: &HandModel,
    user_pose: &Pose,
    hemi: &HemisphereSpec,
    spec: &SamplingSpec,
    sim: &SimParams,
    worker_count: usize,
) -> Result<PlanResult, PlanError> {
    if worker_count == 0 {
        return Err(PlanError::NoWorkers);
    }
    let started = Instant::now();
    let samples = sample_approaches(user_pose, hemi, spec)?;
    let flexions = spec.flexions_for(hemi.mode);
    let mut jobs: Vec<(ApproachSample, f64)> = Vec::new();
    for s in &samples {
        if s.filtered {
            jobs.push((*s, flexions.first().copied().unwrap_or(0.0)));
        } else {
            jobs.extend(flexions.iter().map(|&f| (*s, f)));
        }
    }
    let evaluate = |(s, f): &(ApproachSample, f64)| {
        let mut c = if s.filtered {
            GraspCandidate::unsimulated(s.pose, *f, CandidateStatus::FilteredBelowSurface)
        } else {
            simulate_grasp(scene, hand, &s.pose, *f, hemi.mode, sim)
        };
        c.angular_offset = s.angular_offset;
        c.azimuth_index = s.azimuth_index;
        c
    };
    let candidates: Vec<GraspCandidate> = if worker_count == 1 {
        jobs.iter().map(evaluate).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(worker_count)
            .build()
            .expect("thread pool");
        pool.install(|| jobs.par_iter().map(evaluate).collect())
    };
    let best = select_best(&candidates);
    Ok(PlanResult {
        mode: hemi.mode,
        candidates,
        best,
        timing: PlanTiming {
            wall_seconds: started.elapsed().as_secs_f64(),
            workers: worker_count,
        },
    })
}

pub fn select_best(candidates: &[GraspCandidate]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in candidates.iter().enumerate() {
        if c.status != CandidateStatus::Success {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => {
                let o = &candidates[b];
                c.epsilon > o.epsilon
                    || (c.epsilon == o.epsilon
                        && (c.angular_offset < o.angular_offset
                            || (c.angular_offset == o.angular_offset && c.flexion < o.flexion)))
            }
        };
        if better {
            best = Some(i);
        }
    }
    best
}
