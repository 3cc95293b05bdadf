//! Convex hulls in arbitrary dimension (quickhull with conflict lists).
//!
//! Facets are simplicial: coplanar input points are triangulated. Points
//! within the tolerance of a facet plane count as inside, so near-coplanar
//! input never produces inverted facets.

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HullError {
    #[error("no input points")]
    Empty,
    #[error("points span only {rank} of {dim} dimensions")]
    Degenerate { rank: usize, dim: usize },
}

/// A hull facet: `normal · x ≤ offset` holds for every hull point.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub vertices: Vec<usize>,
    pub normal: Vec<f64>,
    pub offset: f64,
}

#[derive(Debug, Clone)]
pub struct Hull {
    pub dim: usize,
    pub facets: Vec<Facet>,
    /// Absolute distance tolerance used during construction.
    pub tolerance: f64,
}

impl Hull {
    /// Indices of input points that are hull vertices, ascending.
    pub fn vertex_indices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.facets.iter().flat_map(|f| f.vertices.iter().copied()).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Minimum facet offset: the distance from the origin to the hull
    /// boundary when the origin is interior, non-positive otherwise.
    pub fn min_offset(&self) -> f64 {
        self.facets
            .iter()
            .map(|f| f.offset)
            .fold(f64::INFINITY, f64::min)
    }
}

struct Work {
    vertices: Vec<usize>,
    normal: Vec<f64>,
    offset: f64,
    neighbors: Vec<usize>,
    outside: Vec<usize>,
    alive: bool,
}

/// Computes the convex hull of `points` (row-major, `dim` coordinates each).
///
/// `rel_tol` is scaled by the largest coordinate magnitude to give the
/// absolute visibility tolerance.
pub fn convex_hull(points: &[f64], dim: usize, rel_tol: f64) -> Result<Hull, HullError> {
    assert!(dim >= 2, "hull dimension must be at least 2");
    assert_eq!(points.len() % dim, 0);
    let n = points.len() / dim;
    if n == 0 {
        return Err(HullError::Empty);
    }
    let pt = |i: usize| &points[i * dim..(i + 1) * dim];
    let scale = points.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let tol = rel_tol * scale;

    let simplex = initial_simplex(points, dim, tol)?;
    let mut interior = vec![0.0; dim];
    for &i in &simplex {
        for (k, x) in pt(i).iter().enumerate() {
            interior[k] += x / (dim + 1) as f64;
        }
    }

    let mut facets: Vec<Work> = Vec::new();
    for skip in 0..=dim {
        let verts: Vec<usize> = simplex
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != skip)
            .map(|(_, &v)| v)
            .collect();
        let (normal, offset) = oriented_plane(points, dim, &verts, &interior);
        facets.push(Work {
            vertices: verts,
            normal,
            offset,
            neighbors: Vec::new(),
            outside: Vec::new(),
            alive: true,
        });
    }
    // Facet `a` omits simplex vertex `a`; its neighbor across the ridge that
    // omits vertex `v` is the facet omitting `v`.
    for a in 0..=dim {
        let neighbors = facets[a]
            .vertices
            .iter()
            .map(|v| simplex.iter().position(|s| s == v).unwrap())
            .collect();
        facets[a].neighbors = neighbors;
    }

    let mut in_simplex = vec![false; n];
    for &s in &simplex {
        in_simplex[s] = true;
    }
    for i in 0..n {
        if in_simplex[i] {
            continue;
        }
        assign(points, dim, i, &mut facets, 0..=dim, tol);
    }

    let mut queue: VecDeque<usize> = (0..facets.len()).collect();
    while let Some(fi) = queue.pop_front() {
        if !facets[fi].alive || facets[fi].outside.is_empty() {
            continue;
        }
        // Farthest conflict point, ties resolved by lowest index.
        let f = &facets[fi];
        let mut apex = f.outside[0];
        let mut best = signed_distance(&f.normal, f.offset, pt(apex));
        for &p in &f.outside[1..] {
            let d = signed_distance(&f.normal, f.offset, pt(p));
            if d > best || (d == best && p < apex) {
                best = d;
                apex = p;
            }
        }

        // Visible set by flood fill from `fi`.
        let mut visible = vec![fi];
        let mut is_visible: HashMap<usize, bool> = HashMap::new();
        is_visible.insert(fi, true);
        let mut stack = vec![fi];
        while let Some(cur) = stack.pop() {
            for k in 0..dim {
                let nb = facets[cur].neighbors[k];
                if is_visible.contains_key(&nb) {
                    continue;
                }
                let vis = signed_distance(&facets[nb].normal, facets[nb].offset, pt(apex)) > tol;
                is_visible.insert(nb, vis);
                if vis {
                    visible.push(nb);
                    stack.push(nb);
                }
            }
        }

        // Horizon ridges: (visible facet, slot k) with an invisible neighbor.
        let mut new_ids = Vec::new();
        let mut ridge_map: HashMap<Vec<usize>, (usize, usize)> = HashMap::new();
        for &vf in &visible {
            for k in 0..dim {
                let nb = facets[vf].neighbors[k];
                if is_visible[&nb] {
                    continue;
                }
                let mut verts = facets[vf].vertices.clone();
                verts[k] = apex;
                let (normal, offset) = oriented_plane(points, dim, &verts, &interior);
                let id = facets.len();
                let mut neighbors = vec![usize::MAX; dim];
                neighbors[k] = nb;
                let slot = facets[nb].neighbors.iter().position(|&x| x == vf).unwrap();
                facets[nb].neighbors[slot] = id;
                for j in 0..dim {
                    if j == k {
                        continue;
                    }
                    let mut ridge: Vec<usize> = verts
                        .iter()
                        .enumerate()
                        .filter(|&(m, _)| m != j)
                        .map(|(_, &v)| v)
                        .collect();
                    ridge.sort_unstable();
                    if let Some((other, other_slot)) = ridge_map.remove(&ridge) {
                        neighbors[j] = other;
                        facets[other].neighbors[other_slot] = id;
                    } else {
                        ridge_map.insert(ridge, (id, j));
                    }
                }
                facets.push(Work {
                    vertices: verts,
                    normal,
                    offset,
                    neighbors,
                    outside: Vec::new(),
                    alive: true,
                });
                new_ids.push(id);
            }
        }
        debug_assert!(ridge_map.is_empty(), "unmatched horizon ridges");

        let mut orphans = Vec::new();
        for &vf in &visible {
            facets[vf].alive = false;
            orphans.append(&mut facets[vf].outside);
        }
        orphans.sort_unstable();
        for p in orphans {
            if p == apex {
                continue;
            }
            assign(points, dim, p, &mut facets, new_ids.iter().copied(), tol);
        }
        queue.extend(new_ids);
    }

    let facets = facets
        .into_iter()
        .filter(|f| f.alive)
        .map(|f| Facet {
            vertices: f.vertices,
            normal: f.normal,
            offset: f.offset,
        })
        .collect();
    Ok(Hull {
        dim,
        facets,
        tolerance: tol,
    })
}

fn assign(
    points: &[f64],
    dim: usize,
    p: usize,
    facets: &mut [Work],
    candidates: impl Iterator<Item = usize>,
    tol: f64,
) {
    let x = &points[p * dim..(p + 1) * dim];
    let mut best: Option<(usize, f64)> = None;
    for fi in candidates {
        let f = &facets[fi];
        if !f.alive {
            continue;
        }
        let d = signed_distance(&f.normal, f.offset, x);
        if d > tol && best.is_none_or(|(_, bd)| d > bd) {
            best = Some((fi, d));
        }
    }
    if let Some((fi, _)) = best {
        facets[fi].outside.push(p);
    }
}

fn signed_distance(normal: &[f64], offset: f64, x: &[f64]) -> f64 {
    normal.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - offset
}

/// Greedy choice of `dim + 1` affinely independent points.
fn initial_simplex(points: &[f64], dim: usize, tol: f64) -> Result<Vec<usize>, HullError> {
    let n = points.len() / dim;
    let pt = |i: usize| &points[i * dim..(i + 1) * dim];
    // Start from the point with the smallest first coordinate.
    let mut first = 0;
    for i in 1..n {
        if pt(i)[0] < pt(first)[0] {
            first = i;
        }
    }
    let origin = pt(first).to_vec();
    let mut chosen = vec![first];
    let mut basis: Vec<Vec<f64>> = Vec::new();
    while chosen.len() <= dim {
        let mut best = (usize::MAX, tol);
        for i in 0..n {
            let mut r: Vec<f64> = pt(i).iter().zip(&origin).map(|(a, b)| a - b).collect();
            for b in &basis {
                let dot: f64 = r.iter().zip(b).map(|(x, y)| x * y).sum();
                for (x, y) in r.iter_mut().zip(b) {
                    *x -= dot * y;
                }
            }
            let len = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            if len > best.1 {
                best = (i, len);
            }
        }
        if best.0 == usize::MAX {
            return Err(HullError::Degenerate {
                rank: basis.len(),
                dim,
            });
        }
        let mut r: Vec<f64> = pt(best.0).iter().zip(&origin).map(|(a, b)| a - b).collect();
        orthogonalize(&mut r, &basis);
        let len = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        r.iter_mut().for_each(|x| *x /= len);
        basis.push(r);
        chosen.push(best.0);
    }
    Ok(chosen)
}

fn orthogonalize(r: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let dot: f64 = r.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in r.iter_mut().zip(b) {
                *x -= dot * y;
            }
        }
    }
}

/// Hyperplane through `verts` (exactly `dim` points), oriented so that
/// `interior` lies on the negative side. Returns a unit normal and offset.
pub(crate) fn oriented_plane(
    points: &[f64],
    dim: usize,
    verts: &[usize],
    interior: &[f64],
) -> (Vec<f64>, f64) {
    let (mut normal, mut offset) = plane_through(points, dim, verts);
    let side: f64 = normal.iter().zip(interior).map(|(a, b)| a * b).sum::<f64>() - offset;
    if side > 0.0 {
        normal.iter_mut().for_each(|x| *x = -*x);
        offset = -offset;
    }
    (normal, offset)
}

/// Unoriented hyperplane through `dim` points, computed from the vertices in
/// ascending index order so identical vertex sets give identical planes.
pub(crate) fn plane_through(points: &[f64], dim: usize, verts: &[usize]) -> (Vec<f64>, f64) {
    let mut sorted = verts.to_vec();
    sorted.sort_unstable();
    let pt = |i: usize| &points[i * dim..(i + 1) * dim];
    let base = pt(sorted[0]);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(dim - 1);
    for &v in &sorted[1..] {
        let mut r: Vec<f64> = pt(v).iter().zip(base).map(|(a, b)| a - b).collect();
        orthogonalize(&mut r, &basis);
        let len = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if len > 0.0 {
            r.iter_mut().for_each(|x| *x /= len);
        }
        basis.push(r);
    }
    // Complete the basis with the coordinate axis leaving the largest residual.
    let mut best: (Vec<f64>, f64) = (vec![0.0; dim], -1.0);
    for axis in 0..dim {
        let mut r = vec![0.0; dim];
        r[axis] = 1.0;
        orthogonalize(&mut r, &basis);
        let len = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if len > best.1 {
            best = (r, len);
        }
    }
    let mut normal = best.0;
    normal.iter_mut().for_each(|x| *x /= best.1);
    let offset = sorted
        .iter()
        .map(|&v| normal.iter().zip(pt(v)).map(|(a, b)| a * b).sum::<f64>())
        .sum::<f64>()
        / dim as f64;
    (normal, offset)
}
