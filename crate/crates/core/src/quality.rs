//! Grasp wrench space, force closure and the ε (largest inscribed ball)
//! quality metric.

use nalgebra::{DMatrix, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hull::{convex_hull, Facet, HullError};
use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::sim::ContactPoint;

pub const DEFAULT_CONE_EDGES: usize = 8;

/// Rank tolerance relative to the largest singular value.
const RANK_TOL: f64 = 1e-9;
/// Hull visibility tolerance relative to the largest coordinate.
const HULL_TOL: f64 = 1e-12;
/// Wrenches this close to a facet plane (relative) lie on that facet.
const COPLANAR_TOL: f64 = 1e-9;
/// ε values at or below this (relative to the wrench scale) count as zero.
const INTERIOR_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QualityError {
    #[error("cone edge count {0} is below 3")]
    InvalidConeCount(usize),
    #[error("torque scale must be positive")]
    InvalidTorqueScale,
    #[error("wrench hull has empty interior (rank {rank})")]
    DegenerateHull { rank: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WrenchSet {
    /// `(force, λ · torque)` rows.
    pub wrenches: Vec<[f64; 6]>,
    pub torque_scale: f64,
    pub reference: Vector3<f64>,
}

impl WrenchSet {
    pub fn len(&self) -> usize {
        self.wrenches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wrenches.is_empty()
    }

    pub fn rank(&self) -> usize {
        if self.wrenches.is_empty() {
            return 0;
        }
        let m = DMatrix::from_fn(6, self.wrenches.len(), |r, c| self.wrenches[c][r]);
        let sv = m.singular_values();
        let top = sv.max();
        if top <= 0.0 {
            return 0;
        }
        sv.iter().filter(|&&s| s > RANK_TOL * top).count()
    }

    fn magnitude(&self) -> f64 {
        self.wrenches
            .iter()
            .flat_map(|w| w.iter())
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

/// Unit tangent used as the azimuth origin of a contact's friction cone.
///
/// Derived from the contact geometry itself (lever arm, then neighbouring
/// contacts) so the cone discretization rotates and scales with the grasp.
pub fn cone_reference_tangent(contacts: &[ContactPoint], i: usize, reference: &Vector3<f64>) -> Vector3<f64> {
    let n = contacts[i].normal;
    let p = contacts[i].position;
    let scale = contacts
        .iter()
        .map(|c| (c.position - reference).norm())
        .fold(0.0, f64::max)
        .max(1e-12);
    let project = |v: Vector3<f64>| {
        let t = v - n * n.dot(&v);
        (t.norm() > 1e-6 * scale.max(v.norm())).then(|| t.normalize())
    };
    if let Some(t) = project(p - reference) {
        return t;
    }
    for j in (1..contacts.len()).map(|k| (i + k) % contacts.len()) {
        if let Some(t) = project(contacts[j].position - p) {
            return t;
        }
        let nj = contacts[j].normal;
        let t = nj - n * n.dot(&nj);
        if t.norm() > 1e-6 {
            return t.normalize();
        }
    }
    let axis = [Vector3::x(), Vector3::y(), Vector3::z()]
        .into_iter()
        .min_by(|a, b| a.dot(&n).abs().total_cmp(&b.dot(&n).abs()))
        .unwrap();
    (axis - n * n.dot(&axis)).normalize()
}

/// Unit force directions on the discretized Coulomb cone about the inward
/// normal `-normal`; exactly `-normal` when `mu == 0`.
pub fn friction_cone(normal: &Vector3<f64>, mu: f64, edges: usize, tangent: &Vector3<f64>) -> Vec<Vector3<f64>> {
    let inward = -normal;
    if mu <= 0.0 {
        return vec![inward];
    }
    let t1 = *tangent;
    let t2 = normal.cross(&t1);
    let half = mu.atan();
    let (s, c) = half.sin_cos();
    (0..edges)
        .map(|k| {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / edges as f64;
            (inward * c + (t1 * phi.cos() + t2 * phi.sin()) * s).normalize()
        })
        .collect()
}

pub fn wrench_set(
    contacts: &[ContactPoint],
    cone_edges: usize,
    torque_scale: f64,
    reference: &Vector3<f64>,
) -> Result<WrenchSet, QualityError> {
    if cone_edges < 3 {
        return Err(QualityError::InvalidConeCount(cone_edges));
    }
    if !(torque_scale > 0.0) {
        return Err(QualityError::InvalidTorqueScale);
    }
    let mut wrenches = Vec::new();
    for (i, c) in contacts.iter().enumerate() {
        let tangent = cone_reference_tangent(contacts, i, reference);
        let arm = c.position - reference;
        for f in friction_cone(&c.normal, c.mu, cone_edges, &tangent) {
            let t = arm.cross(&f) * torque_scale;
            wrenches.push([f.x, f.y, f.z, t.x, t.y, t.z]);
        }
    }
    Ok(WrenchSet {
        wrenches,
        torque_scale,
        reference: *reference,
    })
}

/// `1 / max_i |v_i − reference|`: torques become dimensionless.
pub fn torque_scale_for(vertices: &[Vector3<f64>], reference: &Vector3<f64>) -> f64 {
    let r = vertices.iter().map(|v| (v - reference).norm()).fold(0.0, f64::max);
    if r > 0.0 {
        1.0 / r
    } else {
        1.0
    }
}

/// Whether the origin lies strictly inside the hull of the wrenches.
///
/// Solves `max t` over convex combinations `α_i = t + β_i` of the wrenches
/// that sum to zero; the origin is interior iff the wrenches span all six
/// dimensions and the optimum is positive.
pub fn force_closure(ws: &WrenchSet) -> bool {
    let n = ws.wrenches.len();
    if n < 7 || ws.rank() < 6 {
        return false;
    }
    // Variables: β_0..β_{n−1}, t.
    let mut objective = vec![0.0; n + 1];
    objective[n] = 1.0;
    let mut lp = LinearProgram::new(n + 1).maximize(objective);
    for r in 0..6 {
        let mut row: Vec<f64> = ws.wrenches.iter().map(|w| w[r]).collect();
        row.push(ws.wrenches.iter().map(|w| w[r]).sum());
        lp.constrain(row, Relation::Eq, 0.0);
    }
    let mut sum = vec![1.0; n + 1];
    sum[n] = n as f64;
    lp.constrain(sum, Relation::Eq, 1.0);
    match lp.solve() {
        LpOutcome::Optimal { objective, .. } => objective > INTERIOR_TOL / n as f64,
        _ => false,
    }
}

/// Radius of the largest origin-centered ball inside the wrench hull, by
/// exact facet enumeration; 0 when the origin is not interior.
pub fn epsilon_quality(ws: &WrenchSet) -> Result<f64, QualityError> {
    if ws.wrenches.is_empty() {
        return Ok(0.0);
    }
    let rank = ws.rank();
    if rank < 6 || ws.wrenches.len() < 7 {
        return Err(QualityError::DegenerateHull { rank });
    }
    let flat: Vec<f64> = ws.wrenches.iter().flat_map(|w| w.iter().copied()).collect();
    let hull = match convex_hull(&flat, 6, HULL_TOL) {
        Ok(h) => h,
        Err(HullError::Degenerate { rank, .. }) => return Err(QualityError::DegenerateHull { rank }),
        Err(HullError::Empty) => return Ok(0.0),
    };
    let eps = hull
        .facets
        .iter()
        .map(|f| canonical_offset(&ws.wrenches, f, COPLANAR_TOL * ws.magnitude()))
        .fold(f64::INFINITY, f64::min);
    Ok(if eps > INTERIOR_TOL * ws.magnitude() { eps } else { 0.0 })
}

/// Offset of a facet's supporting hyperplane, refitted to every wrench on
/// it in lexicographic order. Facets that are triangulated differently, or
/// built in another insertion order, then give bit-equal offsets.
fn canonical_offset(wrenches: &[[f64; 6]], facet: &Facet, tol: f64) -> f64 {
    let dot = |a: &[f64; 6], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut pts: Vec<&[f64; 6]> = wrenches
        .iter()
        .filter(|w| (dot(w, &facet.normal) - facet.offset).abs() <= tol)
        .collect();
    if pts.len() < 6 {
        return facet.offset;
    }
    pts.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let rows = (pts.len() - 1).max(6);
    let m = DMatrix::from_fn(rows, 6, |r, c| if r + 1 < pts.len() { pts[r + 1][c] - pts[0][c] } else { 0.0 });
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors");
    let k = svd.singular_values.imin();
    let mut n: Vec<f64> = (0..6).map(|c| vt[(k, c)]).collect();
    let norm = n.iter().map(|x| x * x).sum::<f64>().sqrt();
    let sign = if dot(&[n[0], n[1], n[2], n[3], n[4], n[5]], &facet.normal) < 0.0 { -1.0 } else { 1.0 };
    n.iter_mut().for_each(|x| *x *= sign / norm);
    pts.iter().map(|p| dot(p, &n)).sum::<f64>() / pts.len() as f64
}

/// ε with a degenerate hull reported as 0.
pub fn epsilon_or_zero(ws: &WrenchSet) -> f64 {
    epsilon_quality(ws).unwrap_or(0.0)
}
