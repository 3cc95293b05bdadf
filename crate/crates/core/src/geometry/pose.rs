use nalgebra::{Isometry3, Point3, Translation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// Rigid transform: a position in meters and a unit-quaternion orientation.
///
/// A pose maps points from its local frame into the parent frame:
/// `p_parent = orientation * p_local + position`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            position: Vector3::zeros(),
            orientation: UnitQuaternion::identity(),
        }
    }

    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            position,
            orientation,
        }
    }

    pub fn from_translation(position: Vector3<f64>) -> Self {
        Self::new(position, UnitQuaternion::identity())
    }

    pub fn from_axis_angle(axis: &Unit<Vector3<f64>>, angle: f64) -> Self {
        Self::new(Vector3::zeros(), UnitQuaternion::from_axis_angle(axis, angle))
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            position: self.orientation * other.position + self.position,
            orientation: renormalize(self.orientation * other.orientation),
        }
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.orientation.inverse();
        Pose {
            position: -(inv * self.position),
            orientation: inv,
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.orientation * p + self.position
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.orientation * v
    }

    pub fn inverse_transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.orientation.inverse_transform_vector(&(p - self.position))
    }

    pub fn inverse_transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.orientation.inverse_transform_vector(v)
    }

    /// Tool z axis expressed in the parent frame.
    pub fn approach_axis(&self) -> Vector3<f64> {
        self.orientation * Vector3::z()
    }

    pub fn translated(&self, delta: &Vector3<f64>) -> Pose {
        Pose::new(self.position + delta, self.orientation)
    }

    /// Linear interpolation of position and shortest-arc slerp of orientation.
    pub fn interpolate(&self, other: &Pose, s: f64) -> Pose {
        if s <= 0.0 {
            return *self;
        }
        if s >= 1.0 {
            return *other;
        }
        let position = self.position + (other.position - self.position) * s;
        let mut target = other.orientation;
        if self.orientation.coords.dot(&target.coords) < 0.0 {
            target = UnitQuaternion::new_unchecked(-target.into_inner());
        }
        let orientation = self
            .orientation
            .try_slerp(&target, s, 1e-12)
            .unwrap_or_else(|| renormalize(self.orientation.nlerp(&target, s)));
        Pose::new(position, orientation)
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.position), self.orientation)
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        Self::new(iso.translation.vector, iso.rotation)
    }

    pub fn point(&self) -> Point3<f64> {
        Point3::from(self.position)
    }
}

fn renormalize(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::new_normalize(q.into_inner())
}
