//! Shape comparison: surface sampling, Chamfer-L1 and volumetric IoU.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::query::closest_point_on_triangle;
use super::{Aabb, GeometryError, TriMesh};

/// Default voxel budget along the largest joint extent for IoU.
pub const DEFAULT_IOU_RESOLUTION: usize = 256;

/// Area-weighted uniform samples on the surface of `mesh`.
///
/// The sample set depends only on the mesh and the seed.
pub fn sample_surface(mesh: &TriMesh, n: usize, seed: u64) -> Vec<Vector3<f64>> {
    let mut cdf = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0;
    for f in 0..mesh.faces.len() {
        total += mesh.face_area(f);
        cdf.push(total);
    }
    if total <= 0.0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let r = rng.random::<f64>() * total;
            let f = cdf.partition_point(|&c| c < r).min(cdf.len() - 1);
            let [a, b, c] = mesh.triangle(f);
            let (mut u, mut v) = (rng.random::<f64>(), rng.random::<f64>());
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            a + (b - a) * u + (c - a) * v
        })
        .collect()
}

/// Chamfer-L1 distance in meters: the sum of the two directed mean
/// nearest-surface distances between area-weighted sample sets.
pub fn chamfer_l1(a: &TriMesh, b: &TriMesh, n_samples: usize, seed: u64) -> Result<f64, GeometryError> {
    if a.is_empty() || b.is_empty() {
        return Err(GeometryError::EmptyMesh);
    }
    if n_samples == 0 {
        return Err(GeometryError::InvalidArgument("n_samples must be at least 1".into()));
    }
    let sa = sample_surface(a, n_samples, seed);
    let sb = sample_surface(b, n_samples, seed);
    let ab = mean_distance(&sa, &TriangleBvh::new(b));
    let ba = mean_distance(&sb, &TriangleBvh::new(a));
    Ok(ab + ba)
}

fn mean_distance(samples: &[Vector3<f64>], target: &TriangleBvh) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|p| target.distance(p)).sum::<f64>() / samples.len() as f64
}

/// Bounding-volume hierarchy over triangles for nearest-surface queries.
pub(crate) struct TriangleBvh {
    tris: Vec<[Vector3<f64>; 3]>,
    nodes: Vec<BvhNode>,
}

struct BvhNode {
    bbox: Aabb,
    /// Leaf: `start..end` into `tris`; inner: children at `left`, `left + 1`.
    start: usize,
    end: usize,
    left: usize,
}

impl TriangleBvh {
    pub(crate) fn new(mesh: &TriMesh) -> Self {
        let mut tris: Vec<[Vector3<f64>; 3]> = (0..mesh.faces.len()).map(|f| mesh.triangle(f)).collect();
        let mut nodes = Vec::new();
        if !tris.is_empty() {
            let n = tris.len();
            nodes.push(BvhNode {
                bbox: tri_bbox(&tris),
                start: 0,
                end: n,
                left: 0,
            });
            let mut stack = vec![0];
            while let Some(i) = stack.pop() {
                let (start, end) = (nodes[i].start, nodes[i].end);
                if end - start <= 4 {
                    continue;
                }
                let axis = nodes[i].bbox.extent().imax();
                let slice = &mut tris[start..end];
                let mid = slice.len() / 2;
                slice.select_nth_unstable_by(mid, |a, b| {
                    let ca = a[0][axis] + a[1][axis] + a[2][axis];
                    let cb = b[0][axis] + b[1][axis] + b[2][axis];
                    ca.total_cmp(&cb)
                });
                let left = nodes.len();
                nodes.push(BvhNode {
                    bbox: tri_bbox(&tris[start..start + mid]),
                    start,
                    end: start + mid,
                    left: 0,
                });
                nodes.push(BvhNode {
                    bbox: tri_bbox(&tris[start + mid..end]),
                    start: start + mid,
                    end,
                    left: 0,
                });
                nodes[i].left = left;
                stack.push(left);
                stack.push(left + 1);
            }
        }
        Self { tris, nodes }
    }

    pub(crate) fn distance(&self, p: &Vector3<f64>) -> f64 {
        if self.nodes.is_empty() {
            return f64::INFINITY;
        }
        let mut best = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            if box_distance_sq(&node.bbox, p) >= best {
                continue;
            }
            if node.left == 0 {
                for t in &self.tris[node.start..node.end] {
                    let d = (closest_point_on_triangle(p, &t[0], &t[1], &t[2]) - p).norm_squared();
                    if d < best {
                        best = d;
                    }
                }
            } else {
                let (l, r) = (node.left, node.left + 1);
                let dl = box_distance_sq(&self.nodes[l].bbox, p);
                let dr = box_distance_sq(&self.nodes[r].bbox, p);
                if dl < dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        best.sqrt()
    }
}

fn tri_bbox(tris: &[[Vector3<f64>; 3]]) -> Aabb {
    Aabb::from_points(tris.iter().flat_map(|t| t.iter())).expect("non-empty triangle set")
}

fn box_distance_sq(b: &Aabb, p: &Vector3<f64>) -> f64 {
    let d = (b.min - p).sup(&Vector3::zeros()).sup(&(p - b.max));
    d.norm_squared()
}

/// Regular occupancy grid; voxel `(i, j, k)` covers
/// `origin + voxel · [i, i+1) × [j, j+1) × [k, k+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub origin: Vector3<f64>,
    pub voxel: f64,
    pub dims: [usize; 3],
    pub occupied: Vec<bool>,
}

impl VoxelGrid {
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    pub fn center(&self, i: usize, j: usize, k: usize) -> Vector3<f64> {
        self.origin + Vector3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * self.voxel
    }

    pub fn count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    /// Occupancy of a closed mesh by vertical ray parity at voxel centers.
    pub fn from_mesh(mesh: &TriMesh, origin: Vector3<f64>, voxel: f64, dims: [usize; 3]) -> VoxelGrid {
        let columns = column_crossings(mesh, origin, voxel, [dims[0], dims[1]]);
        let mut occupied = vec![false; dims[0] * dims[1] * dims[2]];
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let zs = &columns[j * dims[0] + i];
                for pair in zs.chunks_exact(2) {
                    let k0 = ((pair[0] - origin.z) / voxel - 0.5).ceil().max(0.0) as usize;
                    let k1 = ((pair[1] - origin.z) / voxel - 0.5).floor();
                    if k1 < 0.0 {
                        continue;
                    }
                    let k1 = (k1 as usize).min(dims[2].saturating_sub(1));
                    for k in k0..=k1 {
                        if k < dims[2] {
                            occupied[(k * dims[1] + j) * dims[0] + i] = true;
                        }
                    }
                }
            }
        }
        VoxelGrid {
            origin,
            voxel,
            dims,
            occupied,
        }
    }
}

/// Sorted z-crossings of the vertical line through each column center.
///
/// Column centers are nudged by a tiny irrational offset so that lines never
/// pass exactly through shared triangle edges.
fn column_crossings(mesh: &TriMesh, origin: Vector3<f64>, voxel: f64, dims: [usize; 2]) -> Vec<Vec<f64>> {
    let (ox, oy) = (voxel * 0.5 + voxel * 1.234_567e-7, voxel * 0.5 + voxel * 2.718_281e-7);
    let mut columns = vec![Vec::new(); dims[0] * dims[1]];
    for f in 0..mesh.faces.len() {
        let [a, b, c] = mesh.triangle(f);
        let min = a.inf(&b).inf(&c);
        let max = a.sup(&b).sup(&c);
        let i0 = (((min.x - origin.x - ox) / voxel).ceil().max(0.0)) as usize;
        let j0 = (((min.y - origin.y - oy) / voxel).ceil().max(0.0)) as usize;
        let i1 = ((max.x - origin.x - ox) / voxel).floor();
        let j1 = ((max.y - origin.y - oy) / voxel).floor();
        if i1 < 0.0 || j1 < 0.0 {
            continue;
        }
        let i1 = (i1 as usize).min(dims[0].saturating_sub(1));
        let j1 = (j1 as usize).min(dims[1].saturating_sub(1));
        let det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
        if det == 0.0 {
            continue;
        }
        for j in j0..=j1 {
            let y = origin.y + oy + j as f64 * voxel;
            for i in i0..=i1 {
                let x = origin.x + ox + i as f64 * voxel;
                let u = ((x - a.x) * (c.y - a.y) - (c.x - a.x) * (y - a.y)) / det;
                let v = ((b.x - a.x) * (y - a.y) - (x - a.x) * (b.y - a.y)) / det;
                if u >= 0.0 && v >= 0.0 && u + v <= 1.0 {
                    columns[j * dims[0] + i].push(a.z + (b.z - a.z) * u + (c.z - a.z) * v);
                }
            }
        }
    }
    for col in &mut columns {
        col.sort_by(f64::total_cmp);
    }
    columns
}

/// Volumetric IoU of two closed meshes sampled at voxel centers over their
/// joint bounding box.
pub fn volumetric_iou(a: &TriMesh, b: &TriMesh, voxel: f64) -> Result<f64, GeometryError> {
    if !a.is_watertight() || !b.is_watertight() {
        return Err(GeometryError::NonWatertight);
    }
    if !(voxel > 0.0) {
        return Err(GeometryError::InvalidArgument("voxel size must be positive".into()));
    }
    let bbox = a.aabb().unwrap().union(&b.aabb().unwrap());
    let ext = bbox.extent();
    let dims = [
        ((ext.x / voxel).ceil() as usize).max(1),
        ((ext.y / voxel).ceil() as usize).max(1),
        ((ext.z / voxel).ceil() as usize).max(1),
    ];
    let ca = column_crossings(a, bbox.min, voxel, [dims[0], dims[1]]);
    let cb = column_crossings(b, bbox.min, voxel, [dims[0], dims[1]]);
    let (mut inter, mut union) = (0u64, 0u64);
    for (za, zb) in ca.iter().zip(&cb) {
        if za.is_empty() && zb.is_empty() {
            continue;
        }
        for k in 0..dims[2] {
            let z = bbox.min.z + (k as f64 + 0.5) * voxel;
            let ia = parity_inside(za, z);
            let ib = parity_inside(zb, z);
            inter += (ia && ib) as u64;
            union += (ia || ib) as u64;
        }
    }
    Ok(if union == 0 { 0.0 } else { inter as f64 / union as f64 })
}

/// IoU at the default resolution of 256 voxels along the largest joint extent.
pub fn volumetric_iou_default(a: &TriMesh, b: &TriMesh) -> Result<f64, GeometryError> {
    let (Some(ba), Some(bb)) = (a.aabb(), b.aabb()) else {
        return Err(GeometryError::EmptyMesh);
    };
    let ext = ba.union(&bb).extent().max();
    if !(ext > 0.0) {
        return Err(GeometryError::DegenerateObject);
    }
    volumetric_iou(a, b, ext / DEFAULT_IOU_RESOLUTION as f64)
}

fn parity_inside(zs: &[f64], z: f64) -> bool {
    zs.partition_point(|&x| x < z) % 2 == 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{primitives, Pose};

    fn unit_cube() -> TriMesh {
        primitives::cuboid(Vector3::new(1.0, 1.0, 1.0))
    }

    #[test]
    fn chamfer_of_identical_meshes_is_zero() {
        let s = primitives::icosphere(1.0, 3);
        assert!(chamfer_l1(&s, &s, 2000, 7).unwrap() <= 1e-6);
    }

    #[test]
    fn chamfer_is_deterministic_and_symmetric() {
        let a = primitives::icosphere(1.0, 2);
        let b = primitives::cuboid(Vector3::new(1.5, 1.0, 2.0));
        let x = chamfer_l1(&a, &b, 500, 42).unwrap();
        assert_eq!(x.to_bits(), chamfer_l1(&a, &b, 500, 42).unwrap().to_bits());
        assert_eq!(x.to_bits(), chamfer_l1(&b, &a, 500, 42).unwrap().to_bits());
    }

    /// Directed mean distance from a unit sphere to another unit sphere
    /// offset by `d`, integrated over the polar angle by Simpson's rule.
    fn offset_spheres_oracle(d: f64) -> f64 {
        let n = 20_000;
        let h = 2.0 / n as f64;
        let f = |x: f64| ((1.0 + d * d - 2.0 * d * x).sqrt() - 1.0).abs();
        let mut acc = f(-1.0) + f(1.0);
        for k in 1..n {
            let x = -1.0 + k as f64 * h;
            acc += f(x) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0 / 2.0
    }

    #[test]
    fn chamfer_of_offset_spheres_matches_quadrature() {
        let expected = 2.0 * offset_spheres_oracle(0.1);
        assert!((expected - 0.1).abs() < 0.002, "oracle {expected}");
        let a = primitives::icosphere(1.0, 5);
        let b = a.transformed(&Pose::from_translation(Vector3::new(0.1, 0.0, 0.0)));
        let got = chamfer_l1(&a, &b, 20_000, 1).unwrap();
        assert!((got - 0.1).abs() / 0.1 < 0.05, "chamfer {got}");
        assert!((got - expected).abs() / expected < 0.05);
    }

    #[test]
    fn empty_mesh_is_rejected() {
        let e = TriMesh::new(vec![], vec![]).unwrap();
        assert_eq!(chamfer_l1(&e, &unit_cube(), 10, 0), Err(GeometryError::EmptyMesh));
    }

    #[test]
    fn iou_of_cube_cases() {
        let c = unit_cube();
        assert!((volumetric_iou_default(&c, &c).unwrap() - 1.0).abs() < 1e-12);
        let shifted = c.transformed(&Pose::from_translation(Vector3::new(0.5, 0.0, 0.0)));
        let iou = volumetric_iou_default(&c, &shifted).unwrap();
        assert!((iou - 1.0 / 3.0).abs() < 0.03 / 3.0, "{iou}");
        let far = c.transformed(&Pose::from_translation(Vector3::new(3.0, 0.0, 0.0)));
        assert_eq!(volumetric_iou_default(&c, &far).unwrap(), 0.0);
    }

    #[test]
    fn iou_requires_watertight_input() {
        let c = unit_cube();
        let open = TriMesh::new(c.vertices.clone(), c.faces[..10].to_vec()).unwrap();
        assert_eq!(volumetric_iou(&c, &open, 0.05), Err(GeometryError::NonWatertight));
    }

    #[test]
    fn voxel_volume_tracks_mesh_volume() {
        let s = primitives::icosphere(1.0, 4);
        let voxel = 0.02;
        let grid = VoxelGrid::from_mesh(&s, Vector3::new(-1.0, -1.0, -1.0), voxel, [100, 100, 100]);
        let vol = grid.count() as f64 * voxel.powi(3);
        assert!((vol - s.signed_volume()).abs() / s.signed_volume() < 0.01);
    }
}
