//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use hemigrasp_core::quality::{cone_reference_tangent, friction_cone};
use hemigrasp_core::sim::{ContactPoint, ContactSource};
use nalgebra::{SVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

type V6 = SVector<f64, 6>;

fn support(wrenches: &[V6], u: &V6, cutoff: f64) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for w in wrenches {
        let d = w.dot(u);
        if d > best {
            best = d;
            if best >= cutoff {
                return best;
            }
        }
    }
    best
}

fn random_unit(rng: &mut ChaCha8Rng) -> V6 {
    loop {
        let v = V6::from_fn(|_, _| StandardNormal.sample(rng));
        let n = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

/// Shared pool of random unit directions in 6D.
pub struct Directions(Vec<V6>);

impl Directions {
    pub fn new(count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self((0..count).map(|_| random_unit(&mut rng)).collect())
    }
}

/// `min_u max_i u·w_i` over unit directions: a dense sweep followed by a
/// shrinking random local search from the best sweep directions. Returns 0
/// when some direction has nonpositive support.
pub fn epsilon_by_support_sweep(wrenches: &[[f64; 6]], dirs: &Directions, seed: u64) -> f64 {
    if wrenches.is_empty() {
        return 0.0;
    }
    let w: Vec<V6> = wrenches.iter().map(|x| V6::from_column_slice(x)).collect();
    const KEEP: usize = 32;
    let mut top: Vec<(f64, V6)> = Vec::with_capacity(KEEP + 1);
    for u in &dirs.0 {
        let cutoff = if top.len() == KEEP { top[KEEP - 1].0 } else { f64::INFINITY };
        let h = support(&w, u, cutoff);
        if h <= 0.0 {
            return 0.0;
        }
        if h < cutoff {
            let at = top.partition_point(|(v, _)| *v <= h);
            top.insert(at, (h, *u));
            top.truncate(KEEP);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for (mut h, mut u) in top {
        let mut step = 0.05;
        let mut fails = 0;
        while step > 1e-10 {
            let cand = (u + random_unit(&mut rng) * step).normalize();
            let hc = support(&w, &cand, h);
            if hc < h {
                h = hc;
                u = cand;
                fails = 0;
                if h <= 0.0 {
                    return 0.0;
                }
            } else {
                fails += 1;
                if fails > 60 {
                    step *= 0.5;
                    fails = 0;
                }
            }
        }
        let (h, _) = refine_by_tangent_lp(&w, h, u);
        if h <= 0.0 {
            return 0.0;
        }
        best = best.min(h);
    }
    best.max(0.0)
}

/// Repeatedly solves `min_v max_i w_i·v` subject to `u·v = 1` and moves to
/// `v/|v|`; each step can only lower the support value.
fn refine_by_tangent_lp(w: &[V6], mut h: f64, mut u: V6) -> (f64, V6) {
    use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
    for _ in 0..50 {
        let mut p = Problem::new(OptimizationDirection::Minimize);
        let v: Vec<_> = (0..6).map(|_| p.add_var(0.0, (-10.0, 10.0))).collect();
        let t = p.add_var(1.0, (-1e6, 1e6));
        for wi in w {
            let mut e = LinearExpr::empty();
            for j in 0..6 {
                e.add(v[j], wi[j]);
            }
            e.add(t, -1.0);
            p.add_constraint(e, ComparisonOp::Le, 0.0);
        }
        let mut e = LinearExpr::empty();
        for j in 0..6 {
            e.add(v[j], u[j]);
        }
        p.add_constraint(e, ComparisonOp::Eq, 1.0);
        let Ok(microlp::SolveOutcome::Solution(sol)) = p.solve() else { break };
        let next = V6::from_fn(|j, _| sol[v[j]]);
        let n = next.norm();
        let cand = next / n;
        let hc = support(w, &cand, f64::INFINITY);
        if !(hc < h - 1e-15) {
            break;
        }
        h = hc;
        u = cand;
        if h <= 0.0 {
            break;
        }
    }
    (h, u)
}

/// Feasibility of the gravity-balancing problem, solved by an independent
/// simplex implementation.
pub fn hold_oracle(
    contacts: &[ContactPoint],
    mass: f64,
    gravity: Vector3<f64>,
    cone_edges: usize,
    f_max: f64,
    reference: &Vector3<f64>,
) -> bool {
    use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
    let hand: Vec<ContactPoint> = contacts.iter().filter(|c| c.source != ContactSource::World).copied().collect();
    if hand.is_empty() {
        return false;
    }
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let mut cols = Vec::new();
    for (i, c) in hand.iter().enumerate() {
        let t = cone_reference_tangent(&hand, i, reference);
        for f in friction_cone(&c.normal, c.mu, cone_edges, &t) {
            let tau = (c.position - reference).cross(&f);
            let var = problem.add_var(0.0, (0.0, f64::INFINITY));
            cols.push((i, var, [f.x, f.y, f.z, tau.x, tau.y, tau.z]));
        }
    }
    let target = -gravity * mass;
    let rhs = [target.x, target.y, target.z, 0.0, 0.0, 0.0];
    for r in 0..6 {
        let mut e = LinearExpr::empty();
        for (_, v, w) in &cols {
            e.add(*v, w[r]);
        }
        problem.add_constraint(e, ComparisonOp::Eq, rhs[r]);
    }
    for i in 0..hand.len() {
        let mut e = LinearExpr::empty();
        for (_, v, _) in cols.iter().filter(|(c, _, _)| *c == i) {
            e.add(*v, 1.0);
        }
        problem.add_constraint(e, ComparisonOp::Le, f_max);
    }
    matches!(problem.solve(), Ok(microlp::SolveOutcome::Solution(_)))
}

/// Contacts on a sphere of `radius` about `center`, normals tilted up to
/// `tilt` radians from the outward radial direction.
pub fn random_contacts(
    rng: &mut ChaCha8Rng,
    count: usize,
    center: &Vector3<f64>,
    radius: f64,
    tilt: f64,
    mu_range: (f64, f64),
) -> Vec<ContactPoint> {
    (0..count)
        .map(|k| {
            let dir = loop {
                let v = Vector3::<f64>::from_fn(|_, _| StandardNormal.sample(rng));
                if v.norm() > 1e-6 {
                    break v.normalize();
                }
            };
            let wobble = Vector3::<f64>::from_fn(|_, _| StandardNormal.sample(rng));
            let side = (wobble - dir * dir.dot(&wobble)).normalize();
            let a = rng.random_range(0.0..=tilt);
            let normal = (dir * a.cos() + side * a.sin()).normalize();
            ContactPoint {
                position: center + dir * radius,
                normal,
                mu: rng.random_range(mu_range.0..=mu_range.1),
                source: ContactSource::Finger(k),
            }
        })
        .collect()
}
