use nalgebra::Vector3;

use crate::geometry::ConvexPart;
use crate::gjk::segment_polytope;
use crate::hand::Capsule;

/// Signed separation between a capsule surface and a convex part, with the
/// nearest point on the part and the outward part normal there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub separation: f64,
    pub point: Vector3<f64>,
    pub normal: Vector3<f64>,
}

/// Samples used to locate the deepest point of a penetrating segment.
const DEPTH_SAMPLES: usize = 16;
const OVERLAP_EPS: f64 = 1e-9;

pub fn probe_capsule(cap: &Capsule, part: &ConvexPart) -> Probe {
    let r = segment_polytope(cap.a, cap.b, &part.vertices);
    if r.distance > OVERLAP_EPS {
        return Probe {
            separation: r.distance - cap.radius,
            point: r.on_polytope,
            normal: (r.on_segment - r.on_polytope) / r.distance,
        };
    }
    // Segment inside the part: the deepest sampled axis point and the face
    // plane it is closest to.
    let mut best: Option<(f64, Vector3<f64>, usize)> = None;
    for k in 0..=DEPTH_SAMPLES {
        let x = cap.a + (cap.b - cap.a) * (k as f64 / DEPTH_SAMPLES as f64);
        let (j, d) = part
            .planes
            .iter()
            .enumerate()
            .map(|(j, (n, off))| (j, n.dot(&x) - off))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if best.is_none_or(|(bd, _, _)| d < bd) {
            best = Some((d, x, j));
        }
    }
    let (d, x, j) = best.unwrap();
    let n = part.planes[j].0;
    Probe {
        separation: d - cap.radius,
        point: x - n * d,
        normal: n,
    }
}

/// Capsule against the horizontal plane `z = height`.
pub(crate) fn probe_plane(cap: &Capsule, height: f64) -> Probe {
    let low = if (cap.a.z - cap.b.z).abs() < 1e-12 {
        (cap.a + cap.b) * 0.5
    } else if cap.a.z < cap.b.z {
        cap.a
    } else {
        cap.b
    };
    Probe {
        separation: low.z - cap.radius - height,
        point: Vector3::new(low.x, low.y, height),
        normal: Vector3::z(),
    }
}

/// Lower bound on the separation from a bounding sphere; exact probes are
/// only needed when this is small.
pub(crate) fn sphere_bound(cap: &Capsule, center: &Vector3<f64>, radius: f64) -> f64 {
    let ab = cap.b - cap.a;
    let len = ab.norm_squared();
    let t = if len > 0.0 { ((center - cap.a).dot(&ab) / len).clamp(0.0, 1.0) } else { 0.0 };
    (cap.a + ab * t - center).norm() - radius - cap.radius
}
