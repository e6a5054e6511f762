use std::ops::Mul;

use serde::{Deserialize, Serialize};

use crate::scalar::{c, Real};

use super::{Mat3, Vec3};

/// Unit quaternion in (w, x, y, z) order, Hamilton product convention.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Quat<T: Real> {
    pub w: T,
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Quat<T> {
    pub fn identity() -> Self {
        Self {
            w: T::one(),
            x: T::zero(),
            y: T::zero(),
            z: T::zero(),
        }
    }

    pub fn new(w: T, x: T, y: T, z: T) -> Self {
        Self { w, x, y, z }
    }

    pub fn from_array(a: [T; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [T; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn from_axis_angle(axis: Vec3<T>, angle: T) -> Self {
        let axis = axis.normalized();
        let half = angle * c(0.5);
        let s = half.sin();
        Self {
            w: half.cos(),
            x: axis.x * s,
            y: axis.y * s,
            z: axis.z * s,
        }
    }

    /// Exponential map: rotation vector (axis * angle) to quaternion.
    pub fn from_rotvec(v: Vec3<T>) -> Self {
        let angle = v.norm();
        if angle < c(1e-12) {
            // First-order expansion keeps the map smooth through zero.
            let half = c::<T>(0.5);
            Self::new(T::one(), v.x * half, v.y * half, v.z * half).normalized()
        } else {
            Self::from_axis_angle(v, angle)
        }
    }

    /// Logarithm map: quaternion to rotation vector, angle in [0, pi].
    pub fn to_rotvec(self) -> Vec3<T> {
        let q = if self.w < T::zero() { -self } else { self };
        let v = Vec3::new(q.x, q.y, q.z);
        let s = v.norm();
        if s < c(1e-12) {
            v * c(2.0)
        } else {
            let angle = c::<T>(2.0) * s.min(T::one()).asin().max(T::zero());
            // atan2 form is more accurate near pi.
            let angle = if q.w.abs() < c(0.5) {
                c::<T>(2.0) * s.atan2(q.w)
            } else {
                angle
            };
            v * (angle / s)
        }
    }

    /// Extracts the quaternion from a rotation matrix (Shepperd's method).
    pub fn from_matrix(m: &Mat3<T>) -> Self {
        let (r0, r1, r2) = (m.rows[0], m.rows[1], m.rows[2]);
        let trace = r0.x + r1.y + r2.z;
        let quarter = c::<T>(0.25);
        let q = if trace > T::zero() {
            let s = (trace + T::one()).sqrt() * c(2.0);
            Self::new(quarter * s, (r2.y - r1.z) / s, (r0.z - r2.x) / s, (r1.x - r0.y) / s)
        } else if r0.x > r1.y && r0.x > r2.z {
            let s = (T::one() + r0.x - r1.y - r2.z).sqrt() * c(2.0);
            Self::new((r2.y - r1.z) / s, quarter * s, (r0.y + r1.x) / s, (r0.z + r2.x) / s)
        } else if r1.y > r2.z {
            let s = (T::one() + r1.y - r0.x - r2.z).sqrt() * c(2.0);
            Self::new((r0.z - r2.x) / s, (r0.y + r1.x) / s, quarter * s, (r1.z + r2.y) / s)
        } else {
            let s = (T::one() + r2.z - r0.x - r1.y).sqrt() * c(2.0);
            Self::new((r1.x - r0.y) / s, (r0.z + r2.x) / s, (r1.z + r2.y) / s, quarter * s)
        };
        q.normalized()
    }

    pub fn conjugate(self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn dot(self, o: Self) -> T {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        Self::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    pub fn is_unit(self, tol: T) -> bool {
        (self.norm() - T::one()).abs() <= tol
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Rotates a vector: `q v q*`.
    #[inline]
    pub fn rotate(self, v: Vec3<T>) -> Vec3<T> {
        let u = Vec3::new(self.x, self.y, self.z);
        let two = c::<T>(2.0);
        let t = u.cross(v) * two;
        v + t * self.w + u.cross(t)
    }

    pub fn to_matrix(self) -> Mat3<T> {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        let two = c::<T>(2.0);
        let one = T::one();
        Mat3::from_rows(
            Vec3::new(
                one - two * (y * y + z * z),
                two * (x * y - w * z),
                two * (x * z + w * y),
            ),
            Vec3::new(
                two * (x * y + w * z),
                one - two * (x * x + z * z),
                two * (y * z - w * x),
            ),
            Vec3::new(
                two * (x * z - w * y),
                two * (y * z + w * x),
                one - two * (x * x + y * y),
            ),
        )
    }

    /// Angular distance `2 acos(|<a,b>|)`, in [0, pi]. Sign-insensitive.
    ///
    /// Evaluated through the chord length `4 asin(min(|a-b|, |a+b|)/2)`,
    /// which is the same function but stays accurate near zero distance
    /// where `acos` loses half the significant digits.
    pub fn angular_distance(self, o: Self) -> T {
        let diff = Self::new(self.w - o.w, self.x - o.x, self.y - o.y, self.z - o.z).norm();
        let sum = Self::new(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z).norm();
        let chord = diff.min(sum) * c(0.5);
        c::<T>(4.0) * chord.min(T::one()).asin()
    }

    /// Spherical linear interpolation along the shorter arc.
    pub fn slerp(self, other: Self, t: T) -> Self {
        let mut b = other;
        let mut d = self.dot(b);
        if d < T::zero() {
            b = -b;
            d = -d;
        }
        if d > c(0.9995) {
            // Nearly parallel: nlerp avoids the 0/0 in the slerp weights.
            let r = Self::new(
                self.w + (b.w - self.w) * t,
                self.x + (b.x - self.x) * t,
                self.y + (b.y - self.y) * t,
                self.z + (b.z - self.z) * t,
            );
            return r.normalized();
        }
        let theta = d.min(T::one()).acos();
        let s = theta.sin();
        let wa = ((T::one() - t) * theta).sin() / s;
        let wb = (t * theta).sin() / s;
        Self::new(
            self.w * wa + b.w * wb,
            self.x * wa + b.x * wb,
            self.y * wa + b.y * wb,
            self.z * wa + b.z * wb,
        )
        .normalized()
    }
}

impl<T: Real> Mul for Quat<T> {
    type Output = Self;

    /// Hamilton product. Callers compose rotations as `a * b` meaning
    /// "apply b, then a".
    fn mul(self, o: Self) -> Self {
        Self {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
    }
}

impl<T: Real> std::ops::Neg for Quat<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.w, -self.x, -self.y, -self.z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rotate_matches_matrix() {
        let q: Quat<f64> = Quat::from_axis_angle(Vec3::new(1.0, -2.0, 0.5), 1.3);
        let v = Vec3::new(0.2, 0.7, -1.1);
        let r1 = q.rotate(v);
        let r2 = q.to_matrix().mul_vec(v);
        assert!((r1 - r2).norm() < 1e-12);
    }

    #[test]
    fn rotvec_roundtrip() {
        for &angle in &[1e-9, 1e-4, 0.5, 1.5, 3.0, 3.14] {
            let v = Vec3::new(1.0, 0.3, -0.6).normalized() * angle;
            let q: Quat<f64> = Quat::from_rotvec(v);
            assert!((q.to_rotvec() - v).norm() < 1e-8, "angle {angle}");
        }
    }

    #[test]
    fn hamilton_product_convention() {
        // Rz(90) then Rx(90) equals the composed quaternion acting on +y.
        let rz: Quat<f64> = Quat::from_axis_angle(Vec3::unit_z(), std::f64::consts::FRAC_PI_2);
        let rx: Quat<f64> = Quat::from_axis_angle(Vec3::unit_x(), std::f64::consts::FRAC_PI_2);
        let v = Vec3::unit_y();
        let step = rx.rotate(rz.rotate(v));
        let composed = (rx * rz).rotate(v);
        assert!((step - composed).norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn composition_stays_unit(ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in -1.0f64..1.0,
                                  bx in -1.0f64..1.0, by in -1.0f64..1.0, bz in -1.0f64..1.0) {
            let a = Quat::from_rotvec(Vec3::new(ax, ay, az));
            let b = Quat::from_rotvec(Vec3::new(bx, by, bz));
            let p = (a * b).normalized();
            prop_assert!(p.is_unit(1e-9));
        }

        #[test]
        fn double_cover_zero_distance(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0) {
            let q = Quat::from_rotvec(Vec3::new(x, y, z));
            prop_assert!(q.angular_distance(-q) < 1e-9);
        }

        #[test]
        fn slerp_endpoints_exact(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0) {
            let a = Quat::identity();
            let b = Quat::from_rotvec(Vec3::new(x, y, z));
            prop_assert!(a.slerp(b, 0.0).angular_distance(a) < 1e-9);
            prop_assert!(a.slerp(b, 1.0).angular_distance(b) < 1e-9);
        }
    }
}
