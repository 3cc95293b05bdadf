//! Quadric-error-metric edge-collapse decimation.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use nalgebra::{Matrix3, Vector3};

use super::mesh::compact;
use super::{GeometryError, TriMesh};

/// Face budget used when conditioning meshes for collision queries.
pub const DEFAULT_TARGET_FACES: usize = 1000;

/// Weight of the constraint planes placed along open boundary edges.
const BOUNDARY_WEIGHT: f64 = 1e3;
/// Minimum cosine between a face normal before and after a collapse.
const FLIP_COS: f64 = 0.0;

/// Symmetric 4x4 quadric stored as its upper triangle.
#[derive(Debug, Clone, Copy, Default)]
struct Quadric([f64; 10]);

impl Quadric {
    fn from_plane(n: &Vector3<f64>, d: f64, w: f64) -> Self {
        let (a, b, c) = (n.x, n.y, n.z);
        Quadric([
            w * a * a,
            w * a * b,
            w * a * c,
            w * a * d,
            w * b * b,
            w * b * c,
            w * b * d,
            w * c * c,
            w * c * d,
            w * d * d,
        ])
    }

    fn add(&self, o: &Quadric) -> Quadric {
        let mut out = *self;
        for (x, y) in out.0.iter_mut().zip(o.0.iter()) {
            *x += y;
        }
        out
    }

    fn add_assign(&mut self, o: &Quadric) {
        *self = self.add(o);
    }

    fn error(&self, p: &Vector3<f64>) -> f64 {
        let q = &self.0;
        let (x, y, z) = (p.x, p.y, p.z);
        let e = q[0] * x * x
            + 2.0 * q[1] * x * y
            + 2.0 * q[2] * x * z
            + 2.0 * q[3] * x
            + q[4] * y * y
            + 2.0 * q[5] * y * z
            + 2.0 * q[6] * y
            + q[7] * z * z
            + 2.0 * q[8] * z
            + q[9];
        e.max(0.0)
    }

    fn minimizer(&self) -> Option<Vector3<f64>> {
        let q = &self.0;
        let a = Matrix3::new(q[0], q[1], q[2], q[1], q[4], q[5], q[2], q[5], q[7]);
        let scale = a.abs().max();
        if scale <= 0.0 {
            return None;
        }
        if a.determinant().abs() <= 1e-10 * scale * scale * scale {
            return None;
        }
        let b = Vector3::new(-q[3], -q[6], -q[8]);
        a.try_inverse().map(|inv| inv * b)
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    cost: f64,
    u: usize,
    v: usize,
    stamp_u: u32,
    stamp_v: u32,
    target: Vector3<f64>,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then(self.u.cmp(&other.u))
            .then(self.v.cmp(&other.v))
    }
}

/// Decimates `mesh` to at most `target_faces` faces.
pub fn decimate_qem(mesh: &TriMesh, target_faces: usize) -> Result<TriMesh, GeometryError> {
    decimate_qem_traced(mesh, target_faces).map(|(m, _)| m)
}

/// Like [`decimate_qem`], also returning the error of every executed collapse
/// in execution order.
pub fn decimate_qem_traced(
    mesh: &TriMesh,
    target_faces: usize,
) -> Result<(TriMesh, Vec<f64>), GeometryError> {
    if target_faces < 4 {
        return Err(GeometryError::InvalidTarget(target_faces));
    }
    if mesh.is_empty() {
        return Err(GeometryError::EmptyMesh);
    }
    if mesh.faces.len() <= target_faces {
        return Ok((mesh.clone(), Vec::new()));
    }
    let mut d = Decimator::new(mesh);
    let trace = d.run(target_faces);
    Ok((d.finish(), trace))
}

struct Decimator {
    pos: Vec<Vector3<f64>>,
    faces: Vec<[usize; 3]>,
    face_alive: Vec<bool>,
    vert_faces: Vec<Vec<usize>>,
    vert_alive: Vec<bool>,
    stamps: Vec<u32>,
    quadrics: Vec<Quadric>,
    alive_faces: usize,
    heap: BinaryHeap<Reverse<Candidate>>,
}

impl Decimator {
    fn new(mesh: &TriMesh) -> Self {
        let nv = mesh.vertices.len();
        let mut vert_faces = vec![Vec::new(); nv];
        let mut quadrics = vec![Quadric::default(); nv];
        let mut face_alive = vec![true; mesh.faces.len()];
        let mut alive_faces = 0;
        for (f, face) in mesh.faces.iter().enumerate() {
            let n = mesh.face_cross(f);
            let len = n.norm();
            if len <= 0.0 || face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
                face_alive[f] = false;
                continue;
            }
            alive_faces += 1;
            let n = n / len;
            let q = Quadric::from_plane(&n, -n.dot(&mesh.vertices[face[0]]), 1.0);
            for &v in face {
                vert_faces[v].push(f);
                quadrics[v].add_assign(&q);
            }
        }
        // Penalty planes along boundary edges, perpendicular to the face.
        let mut edge_count: std::collections::HashMap<(usize, usize), (usize, usize)> =
            std::collections::HashMap::new();
        for (f, face) in mesh.faces.iter().enumerate() {
            if !face_alive[f] {
                continue;
            }
            for k in 0..3 {
                let (a, b) = (face[k], face[(k + 1) % 3]);
                edge_count.entry((a.min(b), a.max(b))).or_insert((0, f)).0 += 1;
            }
        }
        let mut boundary: Vec<_> = edge_count
            .into_iter()
            .filter(|(_, (c, _))| *c == 1)
            .map(|(e, (_, f))| (e, f))
            .collect();
        boundary.sort_unstable();
        for ((a, b), f) in boundary {
            let fnorm = mesh.face_cross(f).normalize();
            let edge = mesh.vertices[b] - mesh.vertices[a];
            let n = edge.cross(&fnorm);
            let len = n.norm();
            if len <= 0.0 {
                continue;
            }
            let n = n / len;
            let q = Quadric::from_plane(&n, -n.dot(&mesh.vertices[a]), BOUNDARY_WEIGHT);
            quadrics[a].add_assign(&q);
            quadrics[b].add_assign(&q);
        }

        let vert_alive = vert_faces.iter().map(|f| !f.is_empty()).collect();
        let mut d = Decimator {
            pos: mesh.vertices.clone(),
            faces: mesh.faces.clone(),
            face_alive,
            vert_faces,
            vert_alive,
            stamps: vec![0; nv],
            quadrics,
            alive_faces,
            heap: BinaryHeap::new(),
        };
        for u in 0..nv {
            for v in d.neighbors(u) {
                if u < v {
                    d.push_edge(u, v);
                }
            }
        }
        d
    }

    fn neighbors(&self, u: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.vert_faces[u]
            .iter()
            .flat_map(|&f| self.faces[f])
            .filter(|&x| x != u)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn push_edge(&mut self, u: usize, v: usize) {
        let (u, v) = (u.min(v), u.max(v));
        let q = self.quadrics[u].add(&self.quadrics[v]);
        let (target, cost) = match q.minimizer() {
            Some(p) => (p, q.error(&p)),
            None => {
                let mid = (self.pos[u] + self.pos[v]) * 0.5;
                [self.pos[u], self.pos[v], mid]
                    .into_iter()
                    .map(|p| (p, q.error(&p)))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .unwrap()
            }
        };
        self.heap.push(Reverse(Candidate {
            cost,
            u,
            v,
            stamp_u: self.stamps[u],
            stamp_v: self.stamps[v],
            target,
        }));
    }

    fn run(&mut self, target_faces: usize) -> Vec<f64> {
        let mut trace = Vec::new();
        while self.alive_faces > target_faces {
            let Some(Reverse(c)) = self.heap.pop() else {
                break;
            };
            if !self.vert_alive[c.u]
                || !self.vert_alive[c.v]
                || self.stamps[c.u] != c.stamp_u
                || self.stamps[c.v] != c.stamp_v
            {
                continue;
            }
            if !self.collapse_is_valid(c.u, c.v, &c.target) {
                continue;
            }
            self.collapse(c.u, c.v, c.target);
            trace.push(c.cost);
        }
        trace
    }

    /// Link condition plus normal-flip and degeneracy checks.
    fn collapse_is_valid(&self, u: usize, v: usize, target: &Vector3<f64>) -> bool {
        let nu = self.neighbors(u);
        let nv = self.neighbors(v);
        let shared_faces: Vec<usize> = self.vert_faces[u]
            .iter()
            .copied()
            .filter(|f| self.faces[*f].contains(&v))
            .collect();
        if shared_faces.is_empty() {
            return false;
        }
        let common = nu.iter().filter(|x| nv.binary_search(x).is_ok()).count();
        if common != shared_faces.len() {
            return false;
        }
        // A closed tetrahedron cannot lose more faces.
        if self.alive_faces.saturating_sub(shared_faces.len()) < 4 {
            return false;
        }
        for (w, other) in [(u, v), (v, u)] {
            for &f in &self.vert_faces[w] {
                if self.faces[f].contains(&other) {
                    continue;
                }
                let face = self.faces[f];
                let p = |i: usize| {
                    if face[i] == w {
                        *target
                    } else {
                        self.pos[face[i]]
                    }
                };
                let before = (self.pos[face[1]] - self.pos[face[0]])
                    .cross(&(self.pos[face[2]] - self.pos[face[0]]));
                let after = (p(1) - p(0)).cross(&(p(2) - p(0)));
                let (lb, la) = (before.norm(), after.norm());
                if la <= 1e-12 * lb.max(f64::MIN_POSITIVE) || la == 0.0 {
                    return false;
                }
                if before.dot(&after) <= FLIP_COS * lb * la {
                    return false;
                }
            }
        }
        true
    }

    fn collapse(&mut self, u: usize, v: usize, target: Vector3<f64>) {
        self.pos[u] = target;
        let v_faces = std::mem::take(&mut self.vert_faces[v]);
        for f in v_faces {
            if self.faces[f].contains(&u) {
                self.face_alive[f] = false;
                self.alive_faces -= 1;
                for &w in &self.faces[f] {
                    if w != v {
                        self.vert_faces[w].retain(|&g| g != f);
                    }
                }
            } else {
                for x in self.faces[f].iter_mut() {
                    if *x == v {
                        *x = u;
                    }
                }
                self.vert_faces[u].push(f);
            }
        }
        self.vert_alive[v] = false;
        let q = self.quadrics[v];
        self.quadrics[u].add_assign(&q);
        self.stamps[u] += 1;
        for w in self.neighbors(u) {
            self.push_edge(u, w);
        }
    }

    fn finish(self) -> TriMesh {
        let faces: Vec<[usize; 3]> = self
            .faces
            .iter()
            .zip(&self.face_alive)
            .filter(|(_, &a)| a)
            .map(|(f, _)| *f)
            .collect();
        compact(&self.pos, &faces)
    }
}
