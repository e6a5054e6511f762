//! Minimal 3D math: vectors, rotations, rigid transforms.
//!
//! Quaternions follow the (w, x, y, z) component order with the Hamilton
//! product and are renormalized after every composition.

mod linalg;
mod quat;
mod vec3;

pub use linalg::{solve_damped_normal, DMat, DVec};
pub use quat::Quat;
pub use vec3::{Mat3, Vec3};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// A proper rigid-body transform: rotation followed by translation.
///
/// Acting on a point: `p' = R p + t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RigidTransform<T: Real> {
    pub rotation: Quat<T>,
    pub translation: Vec3<T>,
}

impl<T: Real> RigidTransform<T> {
    pub fn identity() -> Self {
        Self {
            rotation: Quat::identity(),
            translation: Vec3::zero(),
        }
    }

    pub fn new(rotation: Quat<T>, translation: Vec3<T>) -> Self {
        Self {
            rotation: rotation.normalized(),
            translation,
        }
    }

    pub fn from_translation(translation: Vec3<T>) -> Self {
        Self {
            rotation: Quat::identity(),
            translation,
        }
    }

    pub fn from_rotation(rotation: Quat<T>) -> Self {
        Self {
            rotation: rotation.normalized(),
            translation: Vec3::zero(),
        }
    }

    /// Applies the transform to a point.
    #[inline]
    pub fn apply(&self, p: Vec3<T>) -> Vec3<T> {
        self.rotation.rotate(p) + self.translation
    }

    /// Rotates a direction vector (ignores translation).
    #[inline]
    pub fn apply_vector(&self, v: Vec3<T>) -> Vec3<T> {
        self.rotation.rotate(v)
    }

    /// Composition: `self ∘ other`, i.e. apply `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: (self.rotation * other.rotation).normalized(),
            translation: self.rotation.rotate(other.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> Self {
        let inv_rot = self.rotation.conjugate();
        Self {
            rotation: inv_rot,
            translation: -inv_rot.rotate(self.translation),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.rotation.is_finite() && self.translation.is_finite()
    }

    /// 4x4 homogeneous matrix, row-major. Test oracles compose these directly.
    pub fn to_homogeneous(&self) -> [[T; 4]; 4] {
        let m = self.rotation.to_matrix();
        let t = self.translation;
        let z = T::zero();
        let one = T::one();
        [
            [m.rows[0].x, m.rows[0].y, m.rows[0].z, t.x],
            [m.rows[1].x, m.rows[1].y, m.rows[1].z, t.y],
            [m.rows[2].x, m.rows[2].y, m.rows[2].z, t.z],
            [z, z, z, one],
        ]
    }
}
