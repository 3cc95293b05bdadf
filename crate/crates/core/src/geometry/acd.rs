//! Approximate convex decomposition by recursive binary splitting.
//!
//! The object is voxelized once. A region (an intersection of half-spaces)
//! is accepted as a part when its voxel concavity
//! `(hull_count − part_count) / hull_count` is within tolerance; otherwise it
//! is cut by a plane perpendicular to its longest principal axis, at the
//! candidate offset that leaves the fewest concave voxels. Each output part
//! is the convex hull of the mesh surface clipped to its region, so the parts
//! cover every input vertex exactly.

use std::collections::HashMap;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use super::metrics::VoxelGrid;
use super::{GeometryError, Pose, TriMesh};
use crate::hull::{convex_hull, HullError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcdParams {
    pub concavity_tol: f64,
    /// Voxels along the largest extent of the object.
    pub resolution: usize,
    pub max_depth: usize,
    /// Cut offsets tried per split.
    pub split_candidates: usize,
    /// Regions with fewer voxels are never split further.
    pub min_voxels: usize,
}

impl Default for AcdParams {
    fn default() -> Self {
        Self {
            concavity_tol: 0.05,
            resolution: 48,
            max_depth: 8,
            split_candidates: 15,
            min_voxels: 16,
        }
    }
}

/// A convex polytope with outward face planes `normal · x = offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexPart {
    pub vertices: Vec<Vector3<f64>>,
    pub faces: Vec<[usize; 3]>,
    pub planes: Vec<(Vector3<f64>, f64)>,
}

impl ConvexPart {
    /// Convex hull of a 3D point set.
    pub fn from_points(points: &[Vector3<f64>]) -> Result<ConvexPart, GeometryError> {
        if points.is_empty() {
            return Err(GeometryError::EmptyMesh);
        }
        let flat: Vec<f64> = points.iter().flat_map(|p| [p.x, p.y, p.z]).collect();
        let hull = convex_hull(&flat, 3, 1e-11).map_err(|e| match e {
            HullError::Empty => GeometryError::EmptyMesh,
            HullError::Degenerate { .. } => {
                GeometryError::NonVoxelizable("points do not span a volume".into())
            }
        })?;
        let used = hull.vertex_indices();
        let remap: HashMap<usize, usize> = used.iter().enumerate().map(|(k, &i)| (i, k)).collect();
        let vertices: Vec<Vector3<f64>> = used.iter().map(|&i| points[i]).collect();
        let mut faces = Vec::with_capacity(hull.facets.len());
        let mut planes = Vec::with_capacity(hull.facets.len());
        for f in &hull.facets {
            let n = Vector3::new(f.normal[0], f.normal[1], f.normal[2]);
            let mut tri = [remap[&f.vertices[0]], remap[&f.vertices[1]], remap[&f.vertices[2]]];
            let (a, b, c) = (vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if (b - a).cross(&(c - a)).dot(&n) < 0.0 {
                tri.swap(1, 2);
            }
            faces.push(tri);
            planes.push((n, f.offset));
        }
        Ok(ConvexPart {
            vertices,
            faces,
            planes,
        })
    }

    pub fn from_mesh(mesh: &TriMesh) -> Result<ConvexPart, GeometryError> {
        Self::from_points(&mesh.vertices)
    }

    pub fn to_mesh(&self) -> TriMesh {
        TriMesh {
            vertices: self.vertices.clone(),
            faces: self.faces.clone(),
        }
    }

    pub fn volume(&self) -> f64 {
        self.to_mesh().signed_volume()
    }

    /// Largest signed plane distance; `≤ 0` inside.
    pub fn signed_distance_bound(&self, p: &Vector3<f64>) -> f64 {
        self.planes
            .iter()
            .map(|(n, d)| n.dot(p) - d)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, p: &Vector3<f64>, tol: f64) -> bool {
        self.signed_distance_bound(p) <= tol
    }

    pub fn centroid(&self) -> Vector3<f64> {
        self.to_mesh().centroid()
    }

    /// Center and radius of a sphere enclosing all vertices.
    pub fn bounding_sphere(&self) -> (Vector3<f64>, f64) {
        let c = self.vertices.iter().sum::<Vector3<f64>>() / self.vertices.len().max(1) as f64;
        let r = self.vertices.iter().map(|v| (v - c).norm()).fold(0.0, f64::max);
        (c, r)
    }

    pub fn transformed(&self, pose: &Pose) -> ConvexPart {
        let vertices: Vec<Vector3<f64>> = self.vertices.iter().map(|v| pose.transform_point(v)).collect();
        let planes = self
            .planes
            .iter()
            .map(|(n, d)| {
                let nn = pose.transform_vector(n);
                (nn, d + nn.dot(&pose.position))
            })
            .collect();
        ConvexPart {
            vertices,
            faces: self.faces.clone(),
            planes,
        }
    }
}

/// Half-space `normal · x ≤ offset`.
type HalfSpace = (Vector3<f64>, f64);

/// Decomposes `mesh` into convex parts with the default parameters and the
/// given concavity tolerance.
pub fn decompose_convex(mesh: &TriMesh, concavity_tol: f64) -> Result<Vec<ConvexPart>, GeometryError> {
    decompose_convex_with(
        mesh,
        &AcdParams {
            concavity_tol,
            ..AcdParams::default()
        },
    )
}

pub fn decompose_convex_with(mesh: &TriMesh, params: &AcdParams) -> Result<Vec<ConvexPart>, GeometryError> {
    if mesh.is_empty() {
        return Err(GeometryError::EmptyMesh);
    }
    let bbox = mesh.aabb().ok_or(GeometryError::EmptyMesh)?;
    let ext = bbox.extent();
    let largest = ext.max();
    if !(largest > 0.0) || ext.min() <= 1e-9 * largest {
        return Err(GeometryError::NonVoxelizable("zero-thickness geometry".into()));
    }
    let closed = if mesh.is_watertight() {
        mesh.clone()
    } else {
        patch_holes(mesh)
    };
    let voxel = largest / params.resolution.max(4) as f64;
    let origin = bbox.min - Vector3::repeat(voxel);
    let dims = [
        (ext.x / voxel).ceil() as usize + 2,
        (ext.y / voxel).ceil() as usize + 2,
        (ext.z / voxel).ceil() as usize + 2,
    ];
    let grid = VoxelGrid::from_mesh(&closed, origin, voxel, dims);
    if grid.count() == 0 {
        return Err(GeometryError::NonVoxelizable("no interior voxels".into()));
    }
    let solid: Vec<Vector3<f64>> = (0..dims[2])
        .flat_map(|k| (0..dims[1]).flat_map(move |j| (0..dims[0]).map(move |i| (i, j, k))))
        .filter(|&(i, j, k)| grid.occupied[grid.index(i, j, k)])
        .map(|(i, j, k)| grid.center(i, j, k))
        .collect();

    let ctx = Ctx {
        mesh: &closed,
        grid: &grid,
        params,
    };
    let mut parts = Vec::new();
    let mut stack: Vec<(Vec<HalfSpace>, usize)> = vec![(Vec::new(), 0)];
    while let Some((region, depth)) = stack.pop() {
        let members: Vec<Vector3<f64>> = solid
            .iter()
            .filter(|p| inside_region(&region, p))
            .copied()
            .collect();
        let Some(eval) = ctx.evaluate(&region, members.len()) else {
            continue;
        };
        let done = eval.concavity <= params.concavity_tol
            || depth >= params.max_depth
            || members.len() < params.min_voxels;
        if done {
            parts.push(eval.part);
            continue;
        }
        match ctx.best_split(&region, &members) {
            Some((left, right)) => {
                // Right first so the left child is processed next.
                stack.push((right, depth + 1));
                stack.push((left, depth + 1));
            }
            None => parts.push(eval.part),
        }
    }
    if parts.is_empty() {
        return Err(GeometryError::NonVoxelizable("no convex parts produced".into()));
    }
    Ok(parts)
}

struct Ctx<'a> {
    mesh: &'a TriMesh,
    grid: &'a VoxelGrid,
    params: &'a AcdParams,
}

struct Evaluation {
    part: ConvexPart,
    concavity: f64,
    concave_voxels: usize,
}

impl Ctx<'_> {
    fn evaluate(&self, region: &[HalfSpace], part_count: usize) -> Option<Evaluation> {
        let points = clip_surface(self.mesh, region);
        let part = ConvexPart::from_points(&points).ok()?;
        let hull_count = count_centers_inside(self.grid, &part);
        let concave_voxels = hull_count.saturating_sub(part_count);
        let concavity = if hull_count == 0 {
            0.0
        } else {
            concave_voxels as f64 / hull_count as f64
        };
        Some(Evaluation {
            part,
            concavity,
            concave_voxels,
        })
    }

    fn best_split(&self, region: &[HalfSpace], members: &[Vector3<f64>]) -> Option<(Vec<HalfSpace>, Vec<HalfSpace>)> {
        let axis = principal_axis(members)?;
        let proj: Vec<f64> = members.iter().map(|p| axis.dot(p)).collect();
        let lo = proj.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = proj.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(hi - lo > self.grid.voxel) {
            return None;
        }
        let k = self.params.split_candidates.max(1);
        let mut best: Option<(usize, Vec<HalfSpace>, Vec<HalfSpace>)> = None;
        for i in 1..=k {
            let c = lo + (hi - lo) * i as f64 / (k + 1) as f64;
            let mut left = region.to_vec();
            left.push((axis, c));
            let mut right = region.to_vec();
            right.push((-axis, -c));
            let nl = proj.iter().filter(|&&x| x <= c).count();
            let nr = proj.len() - nl;
            if nl == 0 || nr == 0 {
                continue;
            }
            let score = self.evaluate(&left, nl).map_or(nl, |e| e.concave_voxels)
                + self.evaluate(&right, nr).map_or(nr, |e| e.concave_voxels);
            if best.as_ref().is_none_or(|(s, _, _)| score < *s) {
                best = Some((score, left, right));
            }
        }
        best.map(|(_, l, r)| (l, r))
    }
}

fn inside_region(region: &[HalfSpace], p: &Vector3<f64>) -> bool {
    region.iter().all(|(n, d)| n.dot(p) <= *d)
}

fn principal_axis(points: &[Vector3<f64>]) -> Option<Vector3<f64>> {
    if points.len() < 2 {
        return None;
    }
    let mean = points.iter().sum::<Vector3<f64>>() / points.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - mean;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let i = eig.eigenvalues.imax();
    let mut axis: Vector3<f64> = eig.eigenvectors.column(i).into_owned();
    // Fix the sign so the split order is reproducible.
    let dominant = axis.iamax();
    if axis[dominant] < 0.0 {
        axis = -axis;
    }
    Some(axis.normalize())
}

fn count_centers_inside(grid: &VoxelGrid, part: &ConvexPart) -> usize {
    let lo = part.vertices.iter().fold(Vector3::repeat(f64::INFINITY), |a, v| a.inf(v));
    let hi = part.vertices.iter().fold(Vector3::repeat(f64::NEG_INFINITY), |a, v| a.sup(v));
    let range = |axis: usize| {
        let a = ((lo[axis] - grid.origin[axis]) / grid.voxel - 0.5).ceil().max(0.0) as usize;
        let b = ((hi[axis] - grid.origin[axis]) / grid.voxel - 0.5).floor();
        let b = if b < 0.0 { 0 } else { (b as usize + 1).min(grid.dims[axis]) };
        a..b
    };
    let tol = grid.voxel * 1e-9;
    let mut count = 0;
    for k in range(2) {
        for j in range(1) {
            for i in range(0) {
                if part.contains(&grid.center(i, j, k), tol) {
                    count += 1;
                }
            }
        }
    }
    count
}

/// Vertices of the mesh triangles clipped to the region.
fn clip_surface(mesh: &TriMesh, region: &[HalfSpace]) -> Vec<Vector3<f64>> {
    let mut out = Vec::new();
    for f in 0..mesh.faces.len() {
        let mut poly: Vec<Vector3<f64>> = mesh.triangle(f).to_vec();
        for (n, d) in region {
            if poly.is_empty() {
                break;
            }
            poly = clip_polygon(&poly, n, *d);
        }
        out.extend(poly);
    }
    out
}

fn clip_polygon(poly: &[Vector3<f64>], n: &Vector3<f64>, d: f64) -> Vec<Vector3<f64>> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let (da, db) = (n.dot(&a) - d, n.dot(&b) - d);
        if da <= 0.0 {
            out.push(a);
        }
        if (da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0) {
            let t = da / (da - db);
            out.push(a + (b - a) * t);
        }
    }
    out
}

/// Closes boundary loops with a fan around each loop's centroid.
pub(crate) fn patch_holes(mesh: &TriMesh) -> TriMesh {
    let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
    for &[a, b, c] in &mesh.faces {
        for e in [(a, b), (b, c), (c, a)] {
            *directed.entry(e).or_default() += 1;
        }
    }
    // Boundary edge a→b: no face contains b→a.
    let mut next: HashMap<usize, usize> = HashMap::new();
    let mut boundary: Vec<(usize, usize)> = directed
        .keys()
        .filter(|(a, b)| !directed.contains_key(&(*b, *a)))
        .copied()
        .collect();
    boundary.sort_unstable();
    for &(a, b) in &boundary {
        // Loops run opposite to the face orientation: b → a.
        next.entry(b).or_insert(a);
    }
    let mut out = mesh.clone();
    let mut visited: HashMap<usize, bool> = HashMap::new();
    for &(_, start) in &boundary {
        if visited.contains_key(&start) {
            continue;
        }
        let mut lp = vec![start];
        visited.insert(start, true);
        let mut cur = start;
        while let Some(&n) = next.get(&cur) {
            if n == start || visited.contains_key(&n) {
                break;
            }
            visited.insert(n, true);
            lp.push(n);
            cur = n;
        }
        if lp.len() < 3 {
            continue;
        }
        let c = lp.iter().map(|&i| out.vertices[i]).sum::<Vector3<f64>>() / lp.len() as f64;
        let ci = out.vertices.len();
        out.vertices.push(c);
        for w in 0..lp.len() {
            out.faces.push([lp[w], lp[(w + 1) % lp.len()], ci]);
        }
    }
    out
}
