use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TriMesh;

const WAVES: usize = 8;

/// Displaces vertices along their normals by a smooth random field whose
/// RMS over the vertices equals `sigma`. Topology is unchanged.
///
/// The field shape depends only on the seed and the mesh extent, so a sigma
/// sweep with a fixed seed scales one and the same deformation.
pub fn perturb_mesh(mesh: &TriMesh, sigma: f64, seed: u64) -> TriMesh {
    if sigma <= 0.0 || mesh.vertices.is_empty() {
        return mesh.clone();
    }
    let scale = mesh.aabb().map(|b| b.diagonal()).unwrap_or(1.0).max(1e-9);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(Vector3<f64>, f64, f64)> = (0..WAVES)
        .map(|_| {
            let dir = loop {
                let v = Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                let n = v.norm();
                if n > 1e-3 && n <= 1.0 {
                    break v / n;
                }
            };
            // Between half a cycle and two cycles across the object.
            let freq = rng.random_range(0.5..2.0) * 2.0 * PI / scale;
            let phase = rng.random_range(0.0..2.0 * PI);
            (dir * freq, phase, rng.random_range(0.5..1.0))
        })
        .collect();
    let field: Vec<f64> = mesh
        .vertices
        .iter()
        .map(|p| {
            waves
                .iter()
                .map(|(k, phase, amp)| amp * (k.dot(p) + phase).sin())
                .sum()
        })
        .collect();
    let rms = (field.iter().map(|x| x * x).sum::<f64>() / field.len() as f64).sqrt();
    if rms <= 0.0 {
        return mesh.clone();
    }
    let normals = mesh.vertex_normals();
    let vertices = mesh
        .vertices
        .iter()
        .zip(&normals)
        .zip(&field)
        .map(|((p, n), f)| p + n * (f * sigma / rms))
        .collect();
    TriMesh {
        vertices,
        faces: mesh.faces.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{chamfer_l1, primitives};

    #[test]
    fn zero_sigma_is_identity() {
        let s = primitives::icosphere(1.0, 2);
        assert_eq!(perturb_mesh(&s, 0.0, 9), s);
    }

    #[test]
    fn seeded_and_rms_normalized() {
        let s = primitives::icosphere(1.0, 3);
        let a = perturb_mesh(&s, 0.01, 5);
        assert_eq!(a, perturb_mesh(&s, 0.01, 5));
        assert_ne!(a, perturb_mesh(&s, 0.01, 6));
        assert_eq!(a.faces, s.faces);
        let rms = (a
            .vertices
            .iter()
            .zip(&s.vertices)
            .map(|(x, y)| (x - y).norm_squared())
            .sum::<f64>()
            / s.vertices.len() as f64)
            .sqrt();
        assert!((rms - 0.01).abs() < 1e-12);
    }

    #[test]
    fn chamfer_scales_with_sigma() {
        let s = primitives::icosphere(1.0, 4);
        let sigma = 0.005;
        let p = perturb_mesh(&s, sigma, 3);
        let cd = chamfer_l1(&s, &p, 20_000, 17).unwrap();
        assert!(cd >= 0.5 * sigma && cd <= 2.0 * sigma, "chamfer {cd}");
    }
}
