use nalgebra::Vector3;

use super::{ContactPoint, PhysicsParams};
use crate::lp::{LinearProgram, Relation};
use crate::quality::{cone_reference_tangent, friction_cone};

/// Whether bounded contact forces inside the discretized friction cones can
/// balance the object's weight.
///
/// Variables are nonnegative magnitudes along each unit cone edge of every
/// hand-object contact; each contact's magnitudes sum to at most `f_max`,
/// and the total force and torque about `reference` must equal
/// `(−m·g, 0)`. Contacts with the support plane are ignored.
pub fn hold_test(
    contacts: &[ContactPoint],
    params: &PhysicsParams,
    cone_edges: usize,
    f_max: f64,
    reference: &Vector3<f64>,
) -> bool {
    assert!(cone_edges >= 3 && f_max > 0.0);
    let hand: Vec<ContactPoint> = contacts.iter().filter(|c| c.on_object()).copied().collect();
    if hand.is_empty() {
        return false;
    }
    let mut columns: Vec<(usize, [f64; 6])> = Vec::new();
    for (i, c) in hand.iter().enumerate() {
        let tangent = cone_reference_tangent(&hand, i, reference);
        let arm = c.position - reference;
        for f in friction_cone(&c.normal, c.mu, cone_edges, &tangent) {
            let t = arm.cross(&f);
            columns.push((i, [f.x, f.y, f.z, t.x, t.y, t.z]));
        }
    }
    let target = -params.gravity * params.mass;
    let rhs = [target.x, target.y, target.z, 0.0, 0.0, 0.0];
    let mut lp = LinearProgram::new(columns.len());
    for r in 0..6 {
        lp.constrain(columns.iter().map(|(_, w)| w[r]).collect(), Relation::Eq, rhs[r]);
    }
    for i in 0..hand.len() {
        lp.constrain(
            columns.iter().map(|(c, _)| if *c == i { 1.0 } else { 0.0 }).collect(),
            Relation::Le,
            f_max,
        );
    }
    lp.solve().is_feasible()
}
