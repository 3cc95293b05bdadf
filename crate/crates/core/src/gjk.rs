//! Distance between a segment and a convex polytope given by its vertices
//! (Gilbert–Johnson–Keerthi on the Minkowski difference).

use nalgebra::Vector3;

/// Closest points between the two sets; `distance == 0` when they overlap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proximity {
    pub distance: f64,
    pub on_segment: Vector3<f64>,
    pub on_polytope: Vector3<f64>,
}

#[derive(Clone, Copy)]
struct Vertex {
    /// Point of the Minkowski difference `a − b`.
    w: Vector3<f64>,
    a: Vector3<f64>,
    b: Vector3<f64>,
}

fn support(seg: &[Vector3<f64>; 2], poly: &[Vector3<f64>], d: &Vector3<f64>) -> Vertex {
    // Support of A − B in direction d: max over A of a·d, min over B of b·d.
    let a = if seg[0].dot(d) >= seg[1].dot(d) { seg[0] } else { seg[1] };
    let mut best = poly[0];
    let mut best_v = best.dot(d);
    for p in &poly[1..] {
        let v = p.dot(d);
        if v < best_v {
            best_v = v;
            best = *p;
        }
    }
    Vertex { w: a - best, a, b: best }
}

/// Segment `[p, q]` against the convex hull of `poly`.
pub fn segment_polytope(p: Vector3<f64>, q: Vector3<f64>, poly: &[Vector3<f64>]) -> Proximity {
    assert!(!poly.is_empty());
    let seg = [p, q];
    let scale = poly
        .iter()
        .chain(seg.iter())
        .map(|v| v.norm())
        .fold(1e-12, f64::max);
    let tol = 1e-12 * scale * scale;
    let mut d = (p + q) * 0.5 - poly[0];
    if d.norm_squared() < tol {
        d = Vector3::x();
    }
    let mut simplex: Vec<Vertex> = vec![support(&seg, poly, &(-d))];
    let mut best = closest_on_simplex(&simplex);
    for _ in 0..64 {
        let v = best.0;
        let vv = v.norm_squared();
        if vv <= tol {
            return witness(&simplex, &best.1, 0.0);
        }
        let s = support(&seg, poly, &(-v));
        // No progress possible: v is the closest point up to rounding.
        if vv - v.dot(&s.w) <= 1e-12 * vv.max(tol) || simplex.iter().any(|x| x.w == s.w) {
            break;
        }
        simplex.push(s);
        let next = closest_on_simplex(&simplex);
        if next.0.norm_squared() >= vv {
            simplex.pop();
            break;
        }
        // Keep only vertices with positive weight.
        let (point, weights) = next;
        let kept: Vec<(Vertex, f64)> = simplex
            .iter()
            .zip(&weights)
            .filter(|(_, &l)| l > 0.0)
            .map(|(v, &l)| (*v, l))
            .collect();
        simplex = kept.iter().map(|k| k.0).collect();
        best = (point, kept.iter().map(|k| k.1).collect());
        if simplex.len() == 4 {
            return witness(&simplex, &best.1, 0.0);
        }
    }
    let dist = best.0.norm();
    witness(&simplex, &best.1, dist)
}

fn witness(simplex: &[Vertex], weights: &[f64], distance: f64) -> Proximity {
    let mut a = Vector3::zeros();
    let mut b = Vector3::zeros();
    for (v, &l) in simplex.iter().zip(weights) {
        a += v.a * l;
        b += v.b * l;
    }
    Proximity {
        distance,
        on_segment: a,
        on_polytope: b,
    }
}

/// Point of the simplex closest to the origin and its barycentric weights.
fn closest_on_simplex(s: &[Vertex]) -> (Vector3<f64>, Vec<f64>) {
    match s.len() {
        1 => (s[0].w, vec![1.0]),
        2 => {
            let (a, b) = (s[0].w, s[1].w);
            let ab = b - a;
            let den = ab.norm_squared();
            let t = if den > 0.0 { (-a.dot(&ab) / den).clamp(0.0, 1.0) } else { 0.0 };
            (a + ab * t, vec![1.0 - t, t])
        }
        3 => {
            let (p, w) = closest_on_triangle(s[0].w, s[1].w, s[2].w);
            (p, w.to_vec())
        }
        4 => closest_on_tetrahedron(s),
        _ => unreachable!(),
    }
}

/// Barycentric closest point on triangle `abc` to the origin.
fn closest_on_triangle(a: Vector3<f64>, b: Vector3<f64>, c: Vector3<f64>) -> (Vector3<f64>, [f64; 3]) {
    let ab = b - a;
    let ac = c - a;
    let ap = -a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (a, [1.0, 0.0, 0.0]);
    }
    let bp = -b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (b, [0.0, 1.0, 0.0]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, [1.0 - v, v, 0.0]);
    }
    let cp = -c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (c, [0.0, 0.0, 1.0]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, [1.0 - w, 0.0, w]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, [0.0, 1.0 - w, w]);
    }
    let den = va + vb + vc;
    if den.abs() < 1e-300 {
        // Degenerate triangle: fall back to the best edge.
        let edges = [(0, 1), (1, 2), (0, 2)];
        let pts = [a, b, c];
        let mut best: Option<(Vector3<f64>, [f64; 3])> = None;
        for (i, j) in edges {
            let e = pts[j] - pts[i];
            let l = e.norm_squared();
            let t = if l > 0.0 { (-pts[i].dot(&e) / l).clamp(0.0, 1.0) } else { 0.0 };
            let p = pts[i] + e * t;
            let mut w = [0.0; 3];
            w[i] = 1.0 - t;
            w[j] = t;
            if best.is_none_or(|(bp, _)| p.norm_squared() < bp.norm_squared()) {
                best = Some((p, w));
            }
        }
        return best.unwrap();
    }
    let v = vb / den;
    let w = vc / den;
    (a + ab * v + ac * w, [1.0 - v - w, v, w])
}

fn closest_on_tetrahedron(s: &[Vertex]) -> (Vector3<f64>, Vec<f64>) {
    let p = [s[0].w, s[1].w, s[2].w, s[3].w];
    let vol = |a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>, d: &Vector3<f64>| (b - a).dot(&(c - a).cross(&(d - a)));
    let total = vol(&p[0], &p[1], &p[2], &p[3]);
    let o = Vector3::zeros();
    if total.abs() > 1e-300 {
        let w = [
            vol(&o, &p[1], &p[2], &p[3]) / total,
            vol(&p[0], &o, &p[2], &p[3]) / total,
            vol(&p[0], &p[1], &o, &p[3]) / total,
            vol(&p[0], &p[1], &p[2], &o) / total,
        ];
        if w.iter().all(|&x| x >= 0.0) {
            return (Vector3::zeros(), w.to_vec());
        }
    }
    let faces = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];
    let mut best: Option<(Vector3<f64>, Vec<f64>)> = None;
    for f in faces {
        let (q, bw) = closest_on_triangle(p[f[0]], p[f[1]], p[f[2]]);
        if best.as_ref().is_none_or(|(bq, _)| q.norm_squared() < bq.norm_squared()) {
            let mut w = vec![0.0; 4];
            for k in 0..3 {
                w[f[k]] = bw[k];
            }
            best = Some((q, w));
        }
    }
    best.unwrap()
}
