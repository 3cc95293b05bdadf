use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{GeometryError, Pose};

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vector3<f64>>) -> Option<Aabb> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut b = Aabb {
            min: *first,
            max: *first,
        };
        for p in it {
            b.min = b.min.inf(p);
            b.max = b.max.sup(p);
        }
        Some(b)
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn center(&self) -> Vector3<f64> {
        (self.min + self.max) * 0.5
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }
}

/// Triangle mesh with vertices in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub faces: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vector3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self, GeometryError> {
        let n = vertices.len();
        if let Some((face, _)) = faces
            .iter()
            .enumerate()
            .find(|(_, f)| f.iter().any(|&i| i >= n))
        {
            return Err(GeometryError::IndexOutOfRange { face });
        }
        Ok(Self { vertices, faces })
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty() || self.faces.is_empty()
    }

    pub fn triangle(&self, f: usize) -> [Vector3<f64>; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Unnormalized face normal (length = 2 × area).
    pub fn face_cross(&self, f: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangle(f);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, f: usize) -> f64 {
        0.5 * self.face_cross(f).norm()
    }

    /// Unit face normals; zero-area faces get a zero vector.
    pub fn face_normals(&self) -> Vec<Vector3<f64>> {
        (0..self.faces.len())
            .map(|f| {
                let n = self.face_cross(f);
                let len = n.norm();
                if len > 0.0 {
                    n / len
                } else {
                    Vector3::zeros()
                }
            })
            .collect()
    }

    /// Area-weighted vertex normals.
    pub fn vertex_normals(&self) -> Vec<Vector3<f64>> {
        let mut normals = vec![Vector3::zeros(); self.vertices.len()];
        for (f, face) in self.faces.iter().enumerate() {
            let n = self.face_cross(f);
            for &v in face {
                normals[v] += n;
            }
        }
        for n in &mut normals {
            let len = n.norm();
            if len > 0.0 {
                *n /= len;
            }
        }
        normals
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Signed enclosed volume (positive for outward-oriented closed meshes).
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|&[a, b, c]| {
                self.vertices[a].dot(&self.vertices[b].cross(&self.vertices[c])) / 6.0
            })
            .sum()
    }

    pub fn aabb(&self) -> Option<Aabb> {
        Aabb::from_points(self.vertices.iter())
    }

    /// Volume centroid for closed meshes, area centroid otherwise.
    pub fn centroid(&self) -> Vector3<f64> {
        let vol = self.signed_volume();
        if vol.abs() > 1e-15 {
            let mut acc = Vector3::zeros();
            for &[a, b, c] in &self.faces {
                let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
                let v = pa.dot(&pb.cross(&pc)) / 6.0;
                acc += (pa + pb + pc) * (v / 4.0);
            }
            return acc / vol;
        }
        let mut acc = Vector3::zeros();
        let mut total = 0.0;
        for f in 0..self.faces.len() {
            let [a, b, c] = self.triangle(f);
            let area = self.face_area(f);
            acc += (a + b + c) * (area / 3.0);
            total += area;
        }
        if total > 0.0 {
            acc / total
        } else if !self.vertices.is_empty() {
            self.vertices.iter().sum::<Vector3<f64>>() / self.vertices.len() as f64
        } else {
            Vector3::zeros()
        }
    }

    pub fn transformed(&self, pose: &Pose) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|v| pose.transform_point(v)).collect(),
            faces: self.faces.clone(),
        }
    }

    pub fn scaled(&self, s: f64) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|v| v * s).collect(),
            faces: self.faces.clone(),
        }
    }

    /// Every undirected edge is shared by exactly two faces with opposite orientation.
    pub fn is_watertight(&self) -> bool {
        if self.is_empty() {
            return false;
        }
        let mut directed: HashMap<(usize, usize), i32> = HashMap::new();
        for &[a, b, c] in &self.faces {
            for (u, v) in [(a, b), (b, c), (c, a)] {
                if u == v {
                    return false;
                }
                *directed.entry((u, v)).or_insert(0) += 1;
            }
        }
        directed
            .iter()
            .all(|(&(u, v), &count)| count == 1 && directed.get(&(v, u)) == Some(&1))
    }

    /// Drops faces whose area is below `min_area` and vertices no face references.
    pub fn without_degenerate_faces(&self, min_area: f64) -> TriMesh {
        let faces: Vec<[usize; 3]> = (0..self.faces.len())
            .filter(|&f| {
                let [a, b, c] = self.faces[f];
                a != b && b != c && a != c && self.face_area(f) > min_area
            })
            .map(|f| self.faces[f])
            .collect();
        compact(&self.vertices, &faces)
    }

    pub fn load(path: &Path) -> Result<TriMesh, GeometryError> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        match ext.as_deref() {
            Some("obj") => Self::load_obj(path),
            Some("stl") => Self::load_stl(path),
            _ => Err(GeometryError::Io(format!(
                "unsupported mesh format: {}",
                path.display()
            ))),
        }
    }

    pub fn load_obj(path: &Path) -> Result<TriMesh, GeometryError> {
        let file = std::fs::File::open(path)
            .map_err(|e| GeometryError::Io(format!("{}: {e}", path.display())))?;
        Self::read_obj(&mut std::io::BufReader::new(file))
            .map_err(|e| GeometryError::Io(format!("{}: {e}", path.display())))
    }

    /// OBJ text; materials are ignored.
    pub fn parse_obj(text: &str) -> Result<TriMesh, GeometryError> {
        Self::read_obj(&mut std::io::Cursor::new(text.as_bytes()))
    }

    fn read_obj(reader: &mut impl std::io::BufRead) -> Result<TriMesh, GeometryError> {
        let opts = tobj::LoadOptions {
            triangulate: true,
            single_index: false,
            ignore_points: true,
            ignore_lines: true,
        };
        let (models, _) = tobj::load_obj_buf(reader, &opts, |_| Err(tobj::LoadError::OpenFileFailed))
            .map_err(|e| GeometryError::Io(e.to_string()))?;
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for model in models {
            let m = model.mesh;
            let base = vertices.len();
            vertices.extend(
                m.positions
                    .chunks_exact(3)
                    .map(|p| Vector3::new(p[0], p[1], p[2])),
            );
            faces.extend(m.indices.chunks_exact(3).map(|t| {
                [
                    base + t[0] as usize,
                    base + t[1] as usize,
                    base + t[2] as usize,
                ]
            }));
        }
        TriMesh::new(vertices, faces)
    }

    /// Binary (or ASCII) STL; coincident vertices are welded.
    pub fn load_stl(path: &Path) -> Result<TriMesh, GeometryError> {
        let mut file = std::fs::File::open(path)
            .map_err(|e| GeometryError::Io(format!("{}: {e}", path.display())))?;
        let indexed = stl_io::read_stl(&mut file)
            .map_err(|e| GeometryError::Io(format!("{}: {e}", path.display())))?;
        let vertices = indexed
            .vertices
            .iter()
            .map(|v| Vector3::new(v[0] as f64, v[1] as f64, v[2] as f64))
            .collect();
        let faces = indexed.faces.iter().map(|f| f.vertices).collect();
        TriMesh::new(vertices, faces)
    }

    pub fn save_obj(&self, path: &Path) -> Result<(), GeometryError> {
        let io = |e: std::io::Error| GeometryError::Io(format!("{}: {e}", path.display()));
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        for v in &self.vertices {
            writeln!(out, "v {} {} {}", v.x, v.y, v.z).map_err(io)?;
        }
        for f in &self.faces {
            writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).map_err(io)?;
        }
        out.flush().map_err(io)
    }

    pub fn save_stl(&self, path: &Path) -> Result<(), GeometryError> {
        let io = |e: std::io::Error| GeometryError::Io(format!("{}: {e}", path.display()));
        let normals = self.face_normals();
        let tris: Vec<stl_io::Triangle> = self
            .faces
            .iter()
            .zip(&normals)
            .map(|(f, n)| {
                let v = |i: usize| {
                    let p = self.vertices[f[i]];
                    stl_io::Vertex::new([p.x as f32, p.y as f32, p.z as f32])
                };
                stl_io::Triangle {
                    normal: stl_io::Normal::new([n.x as f32, n.y as f32, n.z as f32]),
                    vertices: [v(0), v(1), v(2)],
                }
            })
            .collect();
        let mut file = std::fs::File::create(path).map_err(io)?;
        stl_io::write_stl(&mut file, tris.iter()).map_err(io)
    }
}

/// Rebuilds a mesh keeping only referenced vertices, preserving their order.
pub(crate) fn compact(vertices: &[Vector3<f64>], faces: &[[usize; 3]]) -> TriMesh {
    let mut remap = vec![usize::MAX; vertices.len()];
    let mut out_v = Vec::new();
    let mut out_f = Vec::with_capacity(faces.len());
    for f in faces {
        let mut nf = [0; 3];
        for (k, &i) in f.iter().enumerate() {
            if remap[i] == usize::MAX {
                remap[i] = out_v.len();
                out_v.push(vertices[i]);
            }
            nf[k] = remap[i];
        }
        out_f.push(nf);
    }
    TriMesh {
        vertices: out_v,
        faces: out_f,
    }
}

/// Closed primitive builders used by fixtures, tests and the benchmark.
pub mod primitives {
    use super::*;

    /// Axis-aligned box centered at the origin with the given full extents.
    pub fn cuboid(size: Vector3<f64>) -> TriMesh {
        let h = size * 0.5;
        let vertices = (0..8)
            .map(|i| {
                Vector3::new(
                    if i & 1 == 0 { -h.x } else { h.x },
                    if i & 2 == 0 { -h.y } else { h.y },
                    if i & 4 == 0 { -h.z } else { h.z },
                )
            })
            .collect();
        let faces = vec![
            [0, 2, 1],
            [1, 2, 3],
            [4, 5, 6],
            [5, 7, 6],
            [0, 1, 4],
            [1, 5, 4],
            [2, 6, 3],
            [3, 6, 7],
            [0, 4, 2],
            [2, 4, 6],
            [1, 3, 5],
            [3, 7, 5],
        ];
        TriMesh { vertices, faces }
    }

    /// Closed cylinder along z, centered at the origin.
    pub fn cylinder(radius: f64, height: f64, segments: usize) -> TriMesh {
        let segments = segments.max(3);
        let mut vertices = Vec::with_capacity(2 * segments + 2);
        for ring in [-0.5, 0.5] {
            for k in 0..segments {
                let a = 2.0 * PI * k as f64 / segments as f64;
                vertices.push(Vector3::new(radius * a.cos(), radius * a.sin(), ring * height));
            }
        }
        let bottom = vertices.len();
        vertices.push(Vector3::new(0.0, 0.0, -0.5 * height));
        let top = vertices.len();
        vertices.push(Vector3::new(0.0, 0.0, 0.5 * height));
        let mut faces = Vec::with_capacity(4 * segments);
        for k in 0..segments {
            let k1 = (k + 1) % segments;
            let (b0, b1, t0, t1) = (k, k1, segments + k, segments + k1);
            faces.push([b0, b1, t1]);
            faces.push([b0, t1, t0]);
            faces.push([bottom, b1, b0]);
            faces.push([top, t0, t1]);
        }
        TriMesh { vertices, faces }
    }

    /// Icosphere with `20 · 4^subdivisions` faces.
    pub fn icosphere(radius: f64, subdivisions: u32) -> TriMesh {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut vertices: Vec<Vector3<f64>> = [
            (-1.0, t, 0.0),
            (1.0, t, 0.0),
            (-1.0, -t, 0.0),
            (1.0, -t, 0.0),
            (0.0, -1.0, t),
            (0.0, 1.0, t),
            (0.0, -1.0, -t),
            (0.0, 1.0, -t),
            (t, 0.0, -1.0),
            (t, 0.0, 1.0),
            (-t, 0.0, -1.0),
            (-t, 0.0, 1.0),
        ]
        .iter()
        .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
        .collect();
        let mut faces: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
            let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vector3<f64>>| {
                let key = (a.min(b), a.max(b));
                *cache.entry(key).or_insert_with(|| {
                    vertices.push(((vertices[a] + vertices[b]) * 0.5).normalize());
                    vertices.len() - 1
                })
            };
            let mut next = Vec::with_capacity(faces.len() * 4);
            for &[a, b, c] in &faces {
                let ab = midpoint(a, b, &mut vertices);
                let bc = midpoint(b, c, &mut vertices);
                let ca = midpoint(c, a, &mut vertices);
                next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        for v in &mut vertices {
            *v *= radius;
        }
        TriMesh { vertices, faces }
    }

    /// Latitude/longitude sphere; face count is `2 · slices · (stacks − 1)`.
    pub fn uv_sphere(radius: f64, slices: usize, stacks: usize) -> TriMesh {
        let (slices, stacks) = (slices.max(3), stacks.max(2));
        let mut vertices = vec![Vector3::new(0.0, 0.0, radius)];
        for i in 1..stacks {
            let theta = PI * i as f64 / stacks as f64;
            for j in 0..slices {
                let phi = 2.0 * PI * j as f64 / slices as f64;
                vertices.push(
                    Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()) * radius,
                );
            }
        }
        let south = vertices.len();
        vertices.push(Vector3::new(0.0, 0.0, -radius));
        let ring = |i: usize, j: usize| 1 + i * slices + (j % slices);
        let mut faces = Vec::new();
        for j in 0..slices {
            faces.push([0, ring(0, j), ring(0, j + 1)]);
        }
        for i in 0..stacks - 2 {
            for j in 0..slices {
                let (a, b, c, d) = (ring(i, j), ring(i, j + 1), ring(i + 1, j), ring(i + 1, j + 1));
                faces.push([a, c, b]);
                faces.push([b, c, d]);
            }
        }
        for j in 0..slices {
            faces.push([south, ring(stacks - 2, j + 1), ring(stacks - 2, j)]);
        }
        TriMesh { vertices, faces }
    }
}
