use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::math::{Quat, RigidTransform, Vec3};
use crate::scalar::{c, Real};
use crate::{Error, Result};

use super::BodyShape;

/// Pinhole depth camera: +z forward, +x right, +y down in camera frame.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(bound = "", default)]
pub struct CameraSpec<T: Real> {
    pub pose: RigidTransform<T>,
    pub hfov: T,
    pub vfov: T,
    /// Rays per image axis.
    pub resolution: usize,
    pub max_range: T,
}

impl<T: Real> Default for CameraSpec<T> {
    fn default() -> Self {
        // Overhead view at 45 degrees elevation, 0.8 m from the table center.
        let eye = Vec3::new(c(0.566), T::zero(), c(0.586));
        Self {
            pose: Self::look_at(eye, Vec3::new(T::zero(), T::zero(), c(0.02))),
            hfov: c(1.1),
            vfov: c(1.1),
            resolution: 64,
            max_range: c(2.5),
        }
    }
}

impl<T: Real> CameraSpec<T> {
    /// Camera pose looking from `eye` toward `target`, world +z up.
    pub fn look_at(eye: Vec3<T>, target: Vec3<T>) -> RigidTransform<T> {
        let forward = (target - eye).normalized();
        let up = Vec3::unit_z();
        let mut right = forward.cross(up);
        if right.norm() < c(1e-9) {
            right = Vec3::unit_x();
        }
        let right = right.normalized();
        let down = forward.cross(right);
        let m = crate::math::Mat3::from_rows(
            Vec3::new(right.x, down.x, forward.x),
            Vec3::new(right.y, down.y, forward.y),
            Vec3::new(right.z, down.z, forward.z),
        );
        RigidTransform::new(Quat::from_matrix(&m), eye)
    }

    pub fn validate(&self) -> Result<()> {
        let pi = T::PI();
        if !(self.hfov > T::zero() && self.hfov < pi && self.vfov > T::zero() && self.vfov < pi) {
            return Err(Error::invalid("camera fov must lie in (0, pi)"));
        }
        if self.resolution < 16 {
            return Err(Error::invalid("camera resolution must be at least 16"));
        }
        if !(self.max_range > T::zero()) {
            return Err(Error::invalid("camera max range must be positive"));
        }
        Ok(())
    }
}

/// Ray-casts the primitives over the camera's field of view and returns
/// exactly `n_points` world-frame surface points, uniformly subsampled (or
/// padded by resampling) from the hit set. Deterministic for a given seed.
pub fn render_point_cloud<T: Real>(
    camera: &CameraSpec<T>,
    primitives: &[(BodyShape<T>, RigidTransform<T>)],
    n_points: usize,
    seed: u64,
) -> Result<Vec<Vec3<T>>> {
    camera.validate()?;
    if n_points == 0 {
        return Err(Error::invalid("n_points must be positive"));
    }
    let res = camera.resolution;
    let tan_h = (camera.hfov * c(0.5)).tan();
    let tan_v = (camera.vfov * c(0.5)).tan();
    let origin = camera.pose.translation;
    let inv_poses: Vec<RigidTransform<T>> = primitives.iter().map(|(_, p)| p.inverse()).collect();
    let mut hits: Vec<Vec3<T>> = Vec::new();
    for row in 0..res {
        for col in 0..res {
            let u = (c::<T>(col as f64) + c(0.5)) / c(res as f64) * c(2.0) - T::one();
            let v = (c::<T>(row as f64) + c(0.5)) / c(res as f64) * c(2.0) - T::one();
            let dir_cam = Vec3::new(u * tan_h, v * tan_v, T::one()).normalized();
            let dir = camera.pose.apply_vector(dir_cam);
            let mut best = camera.max_range;
            let mut hit = false;
            for ((shape, _), inv) in primitives.iter().zip(&inv_poses) {
                let o_l = inv.apply(origin);
                let d_l = inv.apply_vector(dir);
                if let Some(t) = shape.ray_intersect_local(o_l, d_l) {
                    if t < best {
                        best = t;
                        hit = true;
                    }
                }
            }
            if hit {
                hits.push(origin + dir * best);
            }
        }
    }
    if hits.is_empty() {
        return Err(Error::DegenerateCamera);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cloud = Vec::with_capacity(n_points);
    if hits.len() >= n_points {
        let mut idx = rand::seq::index::sample(&mut rng, hits.len(), n_points).into_vec();
        idx.sort_unstable();
        cloud.extend(idx.into_iter().map(|i| hits[i]));
    } else {
        cloud.extend_from_slice(&hits);
        while cloud.len() < n_points {
            cloud.push(hits[rng.gen_range(0..hits.len())]);
        }
    }
    Ok(cloud)
}
