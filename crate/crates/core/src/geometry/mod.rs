//! Meshes, rigid poses, hemisphere geometry, mesh conditioning and
//! shape-comparison metrics.

mod acd;
mod hemisphere;
mod mesh;
mod metrics;
mod perturb;
mod pose;
mod qem;
pub mod query;

pub use acd::{decompose_convex, decompose_convex_with, AcdParams, ConvexPart};
pub use hemisphere::{
    frame_for_direction, hemisphere_for, surface_pose, tangent_basis, GraspMode, HemisphereSpec,
    DEFAULT_CLEARANCE, POWER_RISE,
};
pub use mesh::{primitives, Aabb, TriMesh};
pub use metrics::{chamfer_l1, sample_surface, volumetric_iou, volumetric_iou_default, VoxelGrid};
pub use perturb::perturb_mesh;
pub use pose::Pose;
pub use qem::{decimate_qem, decimate_qem_traced, DEFAULT_TARGET_FACES};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("mesh has no faces")]
    EmptyMesh,
    #[error("target face count {0} is below the minimum of 4")]
    InvalidTarget(usize),
    #[error("geometry cannot be voxelized: {0}")]
    NonVoxelizable(String),
    #[error("object has zero bounding extent")]
    DegenerateObject,
    #[error("direction lies below the hemisphere base plane")]
    BelowEquator,
    #[error("mesh is not watertight")]
    NonWatertight,
    #[error("face {face} references a vertex out of range")]
    IndexOutOfRange { face: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("mesh io: {0}")]
    Io(String),
}
