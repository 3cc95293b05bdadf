use nalgebra::{Matrix3, Rotation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::{GeometryError, Pose, TriMesh};

/// Height by which the power-grasp hemisphere is lifted above the support plane.
pub const POWER_RISE: f64 = 0.12;
/// Default gap between the object's bounding cylinder and the hemisphere.
pub const DEFAULT_CLEARANCE: f64 = 0.15;

const PARALLEL_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraspMode {
    Power,
    Precision,
}

impl std::fmt::Display for GraspMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GraspMode::Power => "power",
            GraspMode::Precision => "precision",
        })
    }
}

impl std::str::FromStr for GraspMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "power" => Ok(GraspMode::Power),
            "precision" => Ok(GraspMode::Precision),
            other => Err(format!("unknown grasp mode `{other}`")),
        }
    }
}

/// Virtual hemisphere on which the end-effector is constrained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HemisphereSpec {
    pub center: Vector3<f64>,
    pub radius: f64,
    pub up_axis: Vector3<f64>,
    /// Height of the support plane along `up_axis`.
    pub base_height: f64,
    pub mode: GraspMode,
    pub rise: f64,
}

impl HemisphereSpec {
    pub fn direction_is_valid(&self, direction: &Vector3<f64>) -> bool {
        direction.dot(&self.up_axis) >= -PARALLEL_EPS
    }

    /// Unit direction from the center toward `point`.
    pub fn direction_of(&self, point: &Vector3<f64>) -> Vector3<f64> {
        (point - self.center).normalize()
    }

    pub fn pose(&self, direction: &Vector3<f64>, roll: f64) -> Result<Pose, GeometryError> {
        surface_pose(self, direction, roll)
    }

    /// Roll of `pose` about its approach axis relative to the reference frame
    /// convention at the pose's direction.
    pub fn roll_of(&self, pose: &Pose) -> f64 {
        let direction = self.direction_of(&pose.position);
        let (x0, y0) = tangent_basis(&direction, &self.up_axis);
        let x = pose.orientation * Vector3::x();
        x.dot(&y0).atan2(x.dot(&x0))
    }

    /// Distance of `point` from the hemisphere surface.
    pub fn radial_error(&self, point: &Vector3<f64>) -> f64 {
        ((point - self.center).norm() - self.radius).abs()
    }
}

/// Builds the grasp hemisphere around `object_mesh` placed at `object_pose`.
pub fn hemisphere_for(
    object_mesh: &TriMesh,
    object_pose: &Pose,
    support_height: f64,
    mode: GraspMode,
    clearance: f64,
) -> Result<HemisphereSpec, GeometryError> {
    if object_mesh.vertices.is_empty() {
        return Err(GeometryError::DegenerateObject);
    }
    let world = object_mesh.transformed(object_pose);
    let bbox = world.aabb().ok_or(GeometryError::DegenerateObject)?;
    if bbox.diagonal() <= 0.0 {
        return Err(GeometryError::DegenerateObject);
    }
    let up = Vector3::z();
    let centroid = world.centroid();
    let horizontal_radius = world
        .vertices
        .iter()
        .map(|v| {
            let d = v - centroid;
            (d - up * d.dot(&up)).norm()
        })
        .fold(0.0, f64::max);
    let height = bbox.extent().dot(&up);
    let rise = match mode {
        GraspMode::Power => POWER_RISE,
        GraspMode::Precision => 0.0,
    };
    Ok(HemisphereSpec {
        center: Vector3::new(centroid.x, centroid.y, support_height + rise),
        radius: horizontal_radius + 0.5 * height + clearance,
        up_axis: up,
        base_height: support_height,
        mode,
        rise,
    })
}

/// Deterministic tangent frame `(x, y)` perpendicular to `direction`.
///
/// `x` is the world up-axis projected onto the tangent plane (Gram–Schmidt);
/// when `direction` is parallel to `up` the world x-axis is used instead.
pub fn tangent_basis(direction: &Vector3<f64>, up: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let z = -direction;
    let mut reference = *up;
    if reference.cross(&z).norm() < PARALLEL_EPS {
        reference = Vector3::x();
        if reference.cross(&z).norm() < PARALLEL_EPS {
            reference = Vector3::y();
        }
    }
    let x = (reference - z * reference.dot(&z)).normalize();
    let y = z.cross(&x);
    (x, y)
}

/// Orientation whose tool z-axis is `-direction`, rolled by `roll` about it.
pub fn frame_for_direction(
    direction: &Vector3<f64>,
    up: &Vector3<f64>,
    roll: f64,
) -> UnitQuaternion<f64> {
    let z = -direction;
    let (x0, y0) = tangent_basis(direction, up);
    let (s, c) = roll.sin_cos();
    let x = x0 * c + y0 * s;
    let y = z.cross(&x);
    let rot = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z]));
    UnitQuaternion::from_rotation_matrix(&rot)
}

/// Pose on the hemisphere surface along `direction`, pointing at the center.
pub fn surface_pose(
    hemi: &HemisphereSpec,
    direction: &Vector3<f64>,
    roll: f64,
) -> Result<Pose, GeometryError> {
    let norm = direction.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(GeometryError::InvalidArgument(
            "direction must be a non-zero finite vector".into(),
        ));
    }
    let d = Unit::new_normalize(*direction).into_inner();
    if !hemi.direction_is_valid(&d) {
        return Err(GeometryError::BelowEquator);
    }
    Ok(Pose::new(
        hemi.center + d * hemi.radius,
        frame_for_direction(&d, &hemi.up_axis, roll),
    ))
}
