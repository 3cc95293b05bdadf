use std::path::{Path, PathBuf};

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::{PhysicsParams, SimError};
use crate::geometry::{decimate_qem, decompose_convex_with, AcdParams, ConvexPart, Pose, TriMesh, DEFAULT_TARGET_FACES};
use crate::quality::torque_scale_for;

/// Static geometry the hand must not penetrate, in world coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub parts: Vec<ConvexPart>,
    spheres: Vec<(Vector3<f64>, f64)>,
}

impl Obstacle {
    pub fn new(parts: Vec<ConvexPart>) -> Self {
        let spheres = parts.iter().map(|p| p.bounding_sphere()).collect();
        Self { parts, spheres }
    }

    pub fn from_mesh(mesh: &TriMesh, pose: &Pose) -> Result<Self, SimError> {
        let parts = decompose_convex_with(mesh, &AcdParams::default())?;
        Ok(Self::new(parts.iter().map(|p| p.transformed(pose)).collect()))
    }

    pub(crate) fn spheres(&self) -> &[(Vector3<f64>, f64)] {
        &self.spheres
    }
}

/// Collision geometry of an object mesh in its own frame: decimation to
/// about a thousand faces, then convex decomposition.
pub fn collision_parts(mesh: &TriMesh) -> Result<Vec<ConvexPart>, SimError> {
    let collision = if mesh.faces.len() > DEFAULT_TARGET_FACES {
        decimate_qem(mesh, DEFAULT_TARGET_FACES)?
    } else {
        mesh.clone()
    };
    Ok(decompose_convex_with(&collision, &AcdParams::default())?)
}

/// Object resting on a horizontal support plane, plus static obstacles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    /// Object geometry in its own frame.
    pub object_mesh: TriMesh,
    pub object_pose: Pose,
    pub physics: PhysicsParams,
    pub support_height: f64,
    pub obstacles: Vec<Obstacle>,
    /// Convex parts of the object, world frame.
    pub object_parts: Vec<ConvexPart>,
    part_spheres: Vec<(Vector3<f64>, f64)>,
    reference: Vector3<f64>,
    torque_scale: f64,
}

impl Scene {
    /// Conditions the mesh (decimation to about a thousand faces, convex
    /// decomposition) and places it at `object_pose`.
    pub fn new(
        object_mesh: TriMesh,
        object_pose: Pose,
        physics: PhysicsParams,
        support_height: f64,
    ) -> Result<Self, SimError> {
        let parts = collision_parts(&object_mesh)?;
        Self::with_parts(object_mesh, parts, object_pose, physics, support_height)
    }

    /// Uses `parts` (object frame) as the collision geometry.
    pub fn with_parts(
        object_mesh: TriMesh,
        parts: Vec<ConvexPart>,
        object_pose: Pose,
        physics: PhysicsParams,
        support_height: f64,
    ) -> Result<Self, SimError> {
        physics.validate()?;
        let world = object_mesh.transformed(&object_pose);
        let bbox = world.aabb().ok_or(SimError::Geometry(crate::geometry::GeometryError::EmptyMesh))?;
        if bbox.min.z < support_height - 1e-6 {
            return Err(SimError::ObjectBelowSupport);
        }
        let reference = world.centroid();
        let torque_scale = torque_scale_for(&world.vertices, &reference);
        let object_parts: Vec<ConvexPart> = parts.iter().map(|p| p.transformed(&object_pose)).collect();
        let part_spheres = object_parts.iter().map(|p| p.bounding_sphere()).collect();
        Ok(Self {
            object_mesh,
            object_pose,
            physics,
            support_height,
            obstacles: Vec::new(),
            object_parts,
            part_spheres,
            reference,
            torque_scale,
        })
    }

    pub fn with_obstacle(mut self, obstacle: Obstacle) -> Self {
        self.obstacles.push(obstacle);
        self
    }

    /// Object centroid in the world: torque reference for quality and hold.
    pub fn reference(&self) -> Vector3<f64> {
        self.reference
    }

    /// `1 / max distance from the centroid to an object vertex`.
    pub fn torque_scale(&self) -> f64 {
        self.torque_scale
    }

    pub fn world_mesh(&self) -> TriMesh {
        self.object_mesh.transformed(&self.object_pose)
    }

    pub fn object_height(&self) -> f64 {
        self.world_mesh().aabb().map_or(0.0, |b| b.extent().z)
    }

    pub(crate) fn part_spheres(&self) -> &[(Vector3<f64>, f64)] {
        &self.part_spheres
    }

    /// Same hand-facing geometry, with `object_parts` replaced by the
    /// decomposition of another mesh at the same pose.
    pub fn with_object(&self, object_mesh: TriMesh) -> Result<Scene, SimError> {
        let mut s = Scene::new(object_mesh, self.object_pose, self.physics, self.support_height)?;
        s.obstacles = self.obstacles.clone();
        Ok(s)
    }
}

/// Text scene description; paths are relative to the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub object: PathBuf,
    #[serde(default)]
    pub object_pose: PlacementFile,
    #[serde(default)]
    pub support_height: f64,
    #[serde(default)]
    pub physics: PhysicsParams,
    #[serde(default)]
    pub obstacles: Vec<ObstacleFile>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementFile {
    #[serde(default)]
    pub position: [f64; 3],
    /// Rotation about the world z-axis, degrees.
    #[serde(default)]
    pub yaw_deg: f64,
}

impl PlacementFile {
    pub fn to_pose(&self) -> Pose {
        Pose::new(
            Vector3::from(self.position),
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), self.yaw_deg.to_radians()),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleFile {
    pub mesh: PathBuf,
    #[serde(default)]
    pub pose: PlacementFile,
}

pub fn load_scene_file(path: &Path) -> Result<Scene, SimError> {
    let err = |e: String| SimError::SceneFile(format!("{}: {e}", path.display()));
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let file: SceneFile = toml::from_str(&text).map_err(|e| err(e.to_string()))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mesh = TriMesh::load(&dir.join(&file.object))?;
    let mut scene = Scene::new(mesh, file.object_pose.to_pose(), file.physics, file.support_height)?;
    for o in &file.obstacles {
        let mesh = TriMesh::load(&dir.join(&o.mesh))?;
        scene = scene.with_obstacle(Obstacle::from_mesh(&mesh, &o.pose.to_pose())?);
    }
    Ok(scene)
}
