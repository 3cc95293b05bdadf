mod oracle;

use hemigrasp_core::quality::{epsilon_or_zero, epsilon_quality, force_closure, wrench_set, QualityError};
use hemigrasp_core::sim::{ContactPoint, ContactSource};
use nalgebra::{Rotation3, Vector3};
use oracle::{epsilon_by_support_sweep, random_contacts, Directions};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn contact(p: Vector3<f64>, n: Vector3<f64>, mu: f64) -> ContactPoint {
    ContactPoint {
        position: p,
        normal: n.normalize(),
        mu,
        source: ContactSource::Finger(0),
    }
}

fn eps(contacts: &[ContactPoint], edges: usize, scale: f64, reference: &Vector3<f64>) -> f64 {
    epsilon_or_zero(&wrench_set(contacts, edges, scale, reference).unwrap())
}

#[test]
fn equatorial_three_finger_grasp_matches_support_sweep() {
    let contacts: Vec<ContactPoint> = (0..3)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
            let p = Vector3::new(a.cos(), a.sin(), 0.0);
            contact(p, p, 0.5)
        })
        .collect();
    let ws = wrench_set(&contacts, 8, 1.0, &Vector3::zeros()).unwrap();
    let e = epsilon_quality(&ws).unwrap();
    let o = epsilon_by_support_sweep(&ws.wrenches, &Directions::new(200_000, 7), 11);
    assert!(e > 0.0 && force_closure(&ws));
    assert!(e <= o * (1.0 + 1e-9) && o <= e * 1.01, "hull {e} sweep {o}");
}

#[test]
fn random_sets_match_support_sweep() {
    let dirs = Directions::new(100_000, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut closures = 0;
    for k in 0..60 {
        let n = rng.random_range(3..=6);
        let contacts = random_contacts(&mut rng, n, &Vector3::zeros(), 1.0, 0.5, (0.0, 1.0));
        let ws = wrench_set(&contacts, 8, 1.0, &Vector3::zeros()).unwrap();
        let e = epsilon_or_zero(&ws);
        let o = epsilon_by_support_sweep(&ws.wrenches, &dirs, k);
        assert_eq!(force_closure(&ws), e > 0.0, "set {k}");
        assert!((e - o).abs() <= 1e-6_f64.max(0.01 * o), "set {k}: hull {e} sweep {o}");
        closures += (e > 0.0) as usize;
    }
    assert!(closures > 10);
}

#[test]
fn pinch_without_torsional_friction_is_not_closure() {
    let ws = wrench_set(
        &[
            contact(Vector3::x(), Vector3::x(), 0.3),
            contact(-Vector3::x(), -Vector3::x(), 0.3),
        ],
        8,
        1.0,
        &Vector3::zeros(),
    )
    .unwrap();
    assert!(!force_closure(&ws));
    let axial = [0.0, 0.0, 0.0, 1.0, 0.0, 0.0];
    let support = ws.wrenches.iter().map(|w| w.iter().zip(&axial).map(|(a, b)| a * b).sum::<f64>()).fold(f64::MIN, f64::max);
    assert!(support.abs() < 1e-12);
    assert_eq!(epsilon_quality(&ws), Err(QualityError::DegenerateHull { rank: 5 }));
}

fn random_set(seed: u64, count: usize) -> (Vec<ContactPoint>, Vector3<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    (random_contacts(&mut rng, count, &center, 0.7, 0.4, (0.2, 1.0)), center)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rotation_about_the_reference_preserves_epsilon(seed in any::<u64>(), n in 3usize..7, axis in prop::array::uniform3(-1.0f64..1.0), angle in -3.1f64..3.1) {
        let (contacts, reference) = random_set(seed, n);
        prop_assume!(Vector3::from(axis).norm() > 1e-3);
        let rot = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(Vector3::from(axis)), angle);
        let turned: Vec<ContactPoint> = contacts
            .iter()
            .map(|c| ContactPoint { position: reference + rot * (c.position - reference), normal: rot * c.normal, ..*c })
            .collect();
        let a = eps(&contacts, 8, 1.0, &reference);
        let b = eps(&turned, 8, 1.0, &reference);
        prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
    }

    #[test]
    fn scaling_with_matching_torque_scale_preserves_epsilon(seed in any::<u64>(), n in 3usize..7, s in 0.05f64..20.0) {
        let (contacts, reference) = random_set(seed, n);
        let scaled: Vec<ContactPoint> = contacts.iter().map(|c| ContactPoint { position: reference + (c.position - reference) * s, ..*c }).collect();
        let a = eps(&contacts, 8, 1.0, &reference);
        let b = eps(&scaled, 8, 1.0 / s, &reference);
        prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
    }

    #[test]
    fn extra_wrenches_never_lower_epsilon(seed in any::<u64>(), n in 3usize..7, extra in prop::array::uniform6(-1.0f64..1.0)) {
        let (contacts, reference) = random_set(seed, n);
        let ws = wrench_set(&contacts, 8, 1.0, &reference).unwrap();
        let mut grown = ws.clone();
        grown.wrenches.push(extra);
        prop_assert!(epsilon_or_zero(&grown) >= epsilon_or_zero(&ws));
    }

    #[test]
    fn epsilon_and_closure_agree(seed in any::<u64>(), n in 1usize..7) {
        let (contacts, reference) = random_set(seed, n);
        let ws = wrench_set(&contacts, 8, 1.0, &reference).unwrap();
        prop_assert_eq!(force_closure(&ws), epsilon_or_zero(&ws) > 0.0);
    }
}

#[test]
fn retriangulated_facets_give_identical_epsilon() {
    let (contacts, reference) = random_set(5690130623984194683, 6);
    let ws = wrench_set(&contacts, 8, 1.0, &reference).unwrap();
    let mut grown = ws.clone();
    grown.wrenches.push([-0.8545496255868789, -0.7581872226466295, 0.7197564265719307, 0.5205010193737667, 0.19030566146837535, 0.0]);
    assert!(epsilon_or_zero(&grown) >= epsilon_or_zero(&ws));
    assert!(epsilon_or_zero(&ws) > 0.0);
}
