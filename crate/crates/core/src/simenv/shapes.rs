use serde::{Deserialize, Serialize};

use crate::math::{Mat3, Vec3};
use crate::scalar::{c, Real};

/// Collision/render primitive. Capsules are aligned with the local z axis.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(bound = "", tag = "kind", rename_all = "snake_case")]
pub enum BodyShape<T: Real> {
    Sphere { radius: T },
    Capsule { radius: T, half_length: T },
    Box { half_extents: Vec3<T> },
}

impl<T: Real> BodyShape<T> {
    pub fn sphere(radius: T) -> Self {
        BodyShape::Sphere { radius }
    }

    pub fn capsule(radius: T, half_length: T) -> Self {
        BodyShape::Capsule {
            radius,
            half_length,
        }
    }

    pub fn box_shape(half_extents: Vec3<T>) -> Self {
        BodyShape::Box { half_extents }
    }

    pub fn validate(&self) -> bool {
        match *self {
            BodyShape::Sphere { radius } => radius > T::zero(),
            BodyShape::Capsule {
                radius,
                half_length,
            } => radius > T::zero() && half_length > T::zero(),
            BodyShape::Box { half_extents } => half_extents.min_component() > T::zero(),
        }
    }

    /// Half extents of the local axis-aligned bounding box.
    pub fn local_half_extents(&self) -> Vec3<T> {
        match *self {
            BodyShape::Sphere { radius } => Vec3::splat(radius),
            BodyShape::Capsule {
                radius,
                half_length,
            } => Vec3::new(radius, radius, half_length + radius),
            BodyShape::Box { half_extents } => half_extents,
        }
    }

    pub fn contains_local(&self, p: Vec3<T>) -> bool {
        match *self {
            BodyShape::Sphere { radius } => p.norm_sq() <= radius * radius,
            BodyShape::Capsule {
                radius,
                half_length,
            } => {
                let z = p.z.max(-half_length).min(half_length);
                let d = Vec3::new(p.x, p.y, p.z - z);
                d.norm_sq() <= radius * radius
            }
            BodyShape::Box { half_extents } => {
                p.x.abs() <= half_extents.x
                    && p.y.abs() <= half_extents.y
                    && p.z.abs() <= half_extents.z
            }
        }
    }

    /// Signed distance from `p` to the surface (negative inside) and the
    /// outward normal at the closest surface point.
    pub fn signed_distance_local(&self, p: Vec3<T>) -> (T, Vec3<T>) {
        match *self {
            BodyShape::Sphere { radius } => {
                let n = p.norm();
                if n < c(1e-12) {
                    (-radius, Vec3::unit_z())
                } else {
                    (n - radius, p / n)
                }
            }
            BodyShape::Capsule {
                radius,
                half_length,
            } => {
                let z = p.z.max(-half_length).min(half_length);
                let d = Vec3::new(p.x, p.y, p.z - z);
                let n = d.norm();
                if n < c(1e-12) {
                    // On the axis: push out radially toward +x.
                    (-radius, Vec3::unit_x())
                } else {
                    (n - radius, d / n)
                }
            }
            BodyShape::Box { half_extents } => {
                let q = Vec3::new(
                    p.x.abs() - half_extents.x,
                    p.y.abs() - half_extents.y,
                    p.z.abs() - half_extents.z,
                );
                let outside = Vec3::new(
                    q.x.max(T::zero()),
                    q.y.max(T::zero()),
                    q.z.max(T::zero()),
                );
                let out_d = outside.norm();
                if out_d > T::zero() {
                    let closest = Vec3::new(
                        p.x.max(-half_extents.x).min(half_extents.x),
                        p.y.max(-half_extents.y).min(half_extents.y),
                        p.z.max(-half_extents.z).min(half_extents.z),
                    );
                    let n = (p - closest) / out_d;
                    (out_d, n)
                } else {
                    // Inside: exit through the nearest face.
                    let (mut axis, mut depth) = (0usize, q.x);
                    if q.y > depth {
                        axis = 1;
                        depth = q.y;
                    }
                    if q.z > depth {
                        axis = 2;
                        depth = q.z;
                    }
                    let mut n = Vec3::zero();
                    n[axis] = if p[axis] >= T::zero() { T::one() } else { -T::one() };
                    (depth, n)
                }
            }
        }
    }

    /// Nearest positive ray parameter for `origin + t dir` (dir unit).
    pub fn ray_intersect_local(&self, origin: Vec3<T>, dir: Vec3<T>) -> Option<T> {
        match *self {
            BodyShape::Sphere { radius } => ray_sphere(origin, dir, Vec3::zero(), radius),
            BodyShape::Capsule {
                radius,
                half_length,
            } => {
                let mut best: Option<T> = None;
                // Cylindrical side: solve the 2D quadratic in x/y, keep hits
                // whose z lies within the segment.
                let a = dir.x * dir.x + dir.y * dir.y;
                if a > c(1e-16) {
                    let b = c::<T>(2.0) * (origin.x * dir.x + origin.y * dir.y);
                    let k = origin.x * origin.x + origin.y * origin.y - radius * radius;
                    let disc = b * b - c::<T>(4.0) * a * k;
                    if disc >= T::zero() {
                        let sq = disc.sqrt();
                        for t in [(-b - sq) / (c::<T>(2.0) * a), (-b + sq) / (c::<T>(2.0) * a)] {
                            if t > T::zero() {
                                let z = origin.z + dir.z * t;
                                if z.abs() <= half_length {
                                    best = Some(best.map_or(t, |b: T| b.min(t)));
                                }
                            }
                        }
                    }
                }
                for cap in [half_length, -half_length] {
                    if let Some(t) = ray_sphere(origin, dir, Vec3::new(T::zero(), T::zero(), cap), radius)
                    {
                        if best.map_or(true, |b| t < b) {
                            best = Some(t);
                        }
                    }
                }
                best
            }
            BodyShape::Box { half_extents } => {
                // Slab method.
                let mut t_near = T::neg_infinity();
                let mut t_far = T::infinity();
                for i in 0..3 {
                    if dir[i].abs() < c(1e-16) {
                        if origin[i].abs() > half_extents[i] {
                            return None;
                        }
                    } else {
                        let inv = T::one() / dir[i];
                        let mut t0 = (-half_extents[i] - origin[i]) * inv;
                        let mut t1 = (half_extents[i] - origin[i]) * inv;
                        if t0 > t1 {
                            std::mem::swap(&mut t0, &mut t1);
                        }
                        t_near = t_near.max(t0);
                        t_far = t_far.min(t1);
                        if t_near > t_far {
                            return None;
                        }
                    }
                }
                if t_far < T::zero() {
                    None
                } else if t_near > T::zero() {
                    Some(t_near)
                } else {
                    Some(t_far)
                }
            }
        }
    }

    /// Lowest z among the shape's support points in a frame where the shape
    /// is rotated by `rot` (rows of the local-to-world rotation) and centered
    /// at `center`.
    pub fn lowest_point_z(&self, rot: &Mat3<T>, center: Vec3<T>) -> T {
        match *self {
            BodyShape::Sphere { radius } => center.z - radius,
            BodyShape::Capsule {
                radius,
                half_length,
            } => {
                let axis_z = rot.rows[2].z * half_length;
                center.z - axis_z.abs() - radius
            }
            BodyShape::Box { half_extents } => {
                let r = rot;
                let drop = half_extents.x * r.rows[2].x.abs()
                    + half_extents.y * r.rows[2].y.abs()
                    + half_extents.z * r.rows[2].z.abs();
                center.z - drop
            }
        }
    }

    /// Support points for table contact, in the local frame.
    pub fn table_support_points(&self) -> Vec<(Vec3<T>, T)> {
        match *self {
            BodyShape::Sphere { radius } => vec![(Vec3::zero(), radius)],
            BodyShape::Capsule {
                radius,
                half_length,
            } => vec![
                (Vec3::new(T::zero(), T::zero(), half_length), radius),
                (Vec3::new(T::zero(), T::zero(), -half_length), radius),
            ],
            BodyShape::Box { half_extents } => {
                let mut pts = Vec::with_capacity(8);
                for sx in [-T::one(), T::one()] {
                    for sy in [-T::one(), T::one()] {
                        for sz in [-T::one(), T::one()] {
                            pts.push((
                                Vec3::new(
                                    half_extents.x * sx,
                                    half_extents.y * sy,
                                    half_extents.z * sz,
                                ),
                                T::zero(),
                            ));
                        }
                    }
                }
                pts
            }
        }
    }

    /// Body-frame inertia tensor diagonal for a uniform density body of the
    /// given mass.
    pub fn inertia_diagonal(&self, mass: T) -> Vec3<T> {
        match *self {
            BodyShape::Sphere { radius } => {
                let i = c::<T>(0.4) * mass * radius * radius;
                Vec3::splat(i)
            }
            BodyShape::Capsule {
                radius,
                half_length,
            } => {
                // Mass split between cylinder and hemispherical caps by volume.
                let h = half_length * c(2.0);
                let r = radius;
                let vol_cyl = T::PI() * r * r * h;
                let vol_caps = c::<T>(4.0 / 3.0) * T::PI() * r * r * r;
                let m_cyl = mass * vol_cyl / (vol_cyl + vol_caps);
                let m_caps = mass - m_cyl;
                let i_axial = c::<T>(0.5) * m_cyl * r * r + c::<T>(0.4) * m_caps * r * r;
                let i_side = m_cyl * (c::<T>(0.25) * r * r + h * h / c(12.0))
                    + m_caps
                        * (c::<T>(0.4) * r * r
                            + half_length * half_length
                            + c::<T>(0.75) * half_length * r);
                Vec3::new(i_side, i_side, i_axial)
            }
            BodyShape::Box { half_extents } => {
                let d = half_extents * c(2.0);
                let k = mass / c(12.0);
                Vec3::new(
                    k * (d.y * d.y + d.z * d.z),
                    k * (d.x * d.x + d.z * d.z),
                    k * (d.x * d.x + d.y * d.y),
                )
            }
        }
    }
}

fn ray_sphere<T: Real>(origin: Vec3<T>, dir: Vec3<T>, center: Vec3<T>, radius: T) -> Option<T> {
    let oc = origin - center;
    let b = oc.dot(dir);
    let k = oc.norm_sq() - radius * radius;
    let disc = b * b - k;
    if disc < T::zero() {
        return None;
    }
    let sq = disc.sqrt();
    let t0 = -b - sq;
    let t1 = -b + sq;
    if t0 > T::zero() {
        Some(t0)
    } else if t1 > T::zero() {
        Some(t1)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_signed_distance() {
        let s: BodyShape<f64> = BodyShape::sphere(0.5);
        let (d, n) = s.signed_distance_local(Vec3::new(1.0, 0.0, 0.0));
        assert!((d - 0.5).abs() < 1e-12);
        assert!((n - Vec3::unit_x()).norm() < 1e-12);
        let (d, _) = s.signed_distance_local(Vec3::new(0.2, 0.0, 0.0));
        assert!((d + 0.3).abs() < 1e-12);
    }

    #[test]
    fn box_signed_distance_faces_and_corners() {
        let b: BodyShape<f64> = BodyShape::box_shape(Vec3::new(1.0, 2.0, 3.0));
        let (d, n) = b.signed_distance_local(Vec3::new(1.5, 0.0, 0.0));
        assert!((d - 0.5).abs() < 1e-12);
        assert!((n - Vec3::unit_x()).norm() < 1e-12);
        let (d, _) = b.signed_distance_local(Vec3::new(2.0, 3.0, 4.0));
        assert!((d - (1.0f64 + 1.0 + 1.0).sqrt()).abs() < 1e-12);
        let (d, n) = b.signed_distance_local(Vec3::new(0.9, 0.0, 0.0));
        assert!((d + 0.1).abs() < 1e-12);
        assert!((n - Vec3::unit_x()).norm() < 1e-12);
    }

    #[test]
    fn capsule_contains_and_distance() {
        let cp: BodyShape<f64> = BodyShape::capsule(0.1, 0.3);
        assert!(cp.contains_local(Vec3::new(0.0, 0.0, 0.39)));
        assert!(!cp.contains_local(Vec3::new(0.0, 0.0, 0.41)));
        let (d, n) = cp.signed_distance_local(Vec3::new(0.2, 0.0, 0.1));
        assert!((d - 0.1).abs() < 1e-12);
        assert!((n - Vec3::unit_x()).norm() < 1e-12);
    }

    #[test]
    fn ray_box_and_sphere() {
        let b: BodyShape<f64> = BodyShape::box_shape(Vec3::new(0.5, 0.5, 0.5));
        let t = b
            .ray_intersect_local(Vec3::new(-2.0, 0.0, 0.0), Vec3::unit_x())
            .unwrap();
        assert!((t - 1.5).abs() < 1e-12);
        let s: BodyShape<f64> = BodyShape::sphere(1.0);
        let t = s
            .ray_intersect_local(Vec3::new(0.0, 0.0, -3.0), Vec3::unit_z())
            .unwrap();
        assert!((t - 2.0).abs() < 1e-12);
        assert!(s
            .ray_intersect_local(Vec3::new(0.0, 2.0, -3.0), Vec3::unit_z())
            .is_none());
    }

    #[test]
    fn ray_capsule_side_and_cap() {
        let cp: BodyShape<f64> = BodyShape::capsule(0.5, 1.0);
        let t = cp
            .ray_intersect_local(Vec3::new(-2.0, 0.0, 0.0), Vec3::unit_x())
            .unwrap();
        assert!((t - 1.5).abs() < 1e-12);
        let t = cp
            .ray_intersect_local(Vec3::new(0.0, 0.0, 3.0), Vec3::new(0.0, 0.0, -1.0))
            .unwrap();
        assert!((t - 1.5).abs() < 1e-12);
    }

    #[test]
    fn box_lowest_point_under_rotation() {
        use crate::math::Quat;
        let b: BodyShape<f64> = BodyShape::box_shape(Vec3::new(0.1, 0.2, 0.3));
        let rot = Quat::from_axis_angle(Vec3::unit_x(), std::f64::consts::FRAC_PI_2).to_matrix();
        // After a 90-degree roll the y half-extent points down.
        let z = b.lowest_point_z(&rot, Vec3::new(0.0, 0.0, 1.0));
        assert!((z - (1.0 - 0.2)).abs() < 1e-12);
    }
}
