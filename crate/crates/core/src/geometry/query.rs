//! Closest-point primitives shared by the metrics, the collision queries and
//! the test oracles.

use nalgebra::Vector3;

/// Closest point on triangle `abc` to `p`.
pub fn closest_point_on_triangle(
    p: &Vector3<f64>,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    c: &Vector3<f64>,
) -> Vector3<f64> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

pub fn point_triangle_distance_sq(
    p: &Vector3<f64>,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    c: &Vector3<f64>,
) -> f64 {
    (closest_point_on_triangle(p, a, b, c) - p).norm_squared()
}

/// Closest point on segment `ab` to `p`, with its parameter in [0, 1].
pub fn closest_point_on_segment(
    p: &Vector3<f64>,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
) -> (Vector3<f64>, f64) {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 <= 0.0 {
        return (*a, 0.0);
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (a + ab * t, t)
}

/// Closest points between segments `p1q1` and `p2q2`.
pub fn closest_points_segments(
    p1: &Vector3<f64>,
    q1: &Vector3<f64>,
    p2: &Vector3<f64>,
    q2: &Vector3<f64>,
) -> (Vector3<f64>, Vector3<f64>) {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let eps = 1e-300;
    let (s, t);
    if a <= eps && e <= eps {
        return (*p1, *p2);
    }
    if a <= eps {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= eps {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 0.0 {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    (p1 + d1 * s, p2 + d2 * t)
}

/// Closest points between segment `pq` and triangle `abc`.
///
/// Returns `(on_segment, on_triangle)`. When the segment pierces the
/// triangle both points coincide.
pub fn closest_points_segment_triangle(
    p: &Vector3<f64>,
    q: &Vector3<f64>,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    c: &Vector3<f64>,
) -> (Vector3<f64>, Vector3<f64>) {
    let n = (b - a).cross(&(c - a));
    let nn = n.norm_squared();
    if nn > 0.0 {
        let dp = n.dot(&(p - a));
        let dq = n.dot(&(q - a));
        if (dp <= 0.0 && dq >= 0.0) || (dp >= 0.0 && dq <= 0.0) {
            let denom = dp - dq;
            let t = if denom.abs() > 0.0 { dp / denom } else { 0.0 };
            let x = p + (q - p) * t;
            if point_in_triangle(&x, a, b, c, &n) {
                return (x, x);
            }
        }
    }
    let mut best = (f64::INFINITY, *p, *a);
    let mut consider = |s: Vector3<f64>, t: Vector3<f64>| {
        let d = (s - t).norm_squared();
        if d < best.0 {
            best = (d, s, t);
        }
    };
    consider(*p, closest_point_on_triangle(p, a, b, c));
    consider(*q, closest_point_on_triangle(q, a, b, c));
    for (u, v) in [(a, b), (b, c), (c, a)] {
        let (s, t) = closest_points_segments(p, q, u, v);
        consider(s, t);
    }
    (best.1, best.2)
}

fn point_in_triangle(
    x: &Vector3<f64>,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    c: &Vector3<f64>,
    n: &Vector3<f64>,
) -> bool {
    let c0 = (b - a).cross(&(x - a)).dot(n);
    let c1 = (c - b).cross(&(x - b)).dot(n);
    let c2 = (a - c).cross(&(x - c)).dot(n);
    (c0 >= 0.0 && c1 >= 0.0 && c2 >= 0.0) || (c0 <= 0.0 && c1 <= 0.0 && c2 <= 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rv(rng: &mut ChaCha8Rng) -> Vector3<f64> {
        Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
    }

    #[test]
    fn triangle_closest_point_beats_dense_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let (a, b, c, p) = (rv(&mut rng), rv(&mut rng), rv(&mut rng), rv(&mut rng) * 2.0);
            let d = point_triangle_distance_sq(&p, &a, &b, &c).sqrt();
            let mut best = f64::INFINITY;
            let n = 60;
            for i in 0..=n {
                for j in 0..=(n - i) {
                    let (u, v) = (i as f64 / n as f64, j as f64 / n as f64);
                    let x = a + (b - a) * u + (c - a) * v;
                    best = best.min((x - p).norm());
                }
            }
            assert!(d <= best + 1e-12);
            assert!(best - d < 0.05);
        }
    }

    #[test]
    fn segment_triangle_matches_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let (a, b, c) = (rv(&mut rng), rv(&mut rng), rv(&mut rng));
            let (p, q) = (rv(&mut rng) * 1.5, rv(&mut rng) * 1.5);
            let (s, t) = closest_points_segment_triangle(&p, &q, &a, &b, &c);
            let d = (s - t).norm();
            let mut best = f64::INFINITY;
            for k in 0..=400 {
                let x = p + (q - p) * (k as f64 / 400.0);
                best = best.min(point_triangle_distance_sq(&x, &a, &b, &c).sqrt());
            }
            assert!(d <= best + 1e-9, "{d} > {best}");
            assert!(best - d < 0.01);
        }
    }
}
