use std::ops::{Add, AddAssign, Div, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// 3-vector of the working scalar.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Vec3<T: Real> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn splat(v: T) -> Self {
        Self::new(v, v, v)
    }

    pub fn unit_x() -> Self {
        Self::new(T::one(), T::zero(), T::zero())
    }

    pub fn unit_y() -> Self {
        Self::new(T::zero(), T::one(), T::zero())
    }

    pub fn unit_z() -> Self {
        Self::new(T::zero(), T::zero(), T::one())
    }

    pub fn from_slice(s: &[T]) -> Self {
        Self::new(s[0], s[1], s[2])
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        if n > T::zero() {
            self / n
        } else {
            self
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn abs(self) -> Self {
        Self::new(self.x.abs(), self.y.abs(), self.z.abs())
    }

    pub fn min_component(self) -> T {
        self.x.min(self.y).min(self.z)
    }

    pub fn scale(self, s: T) -> Self {
        self * s
    }

    pub fn lerp(self, o: Self, t: T) -> Self {
        self + (o - self) * t
    }
}

impl<T: Real> Index<usize> for Vec3<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index out of range: {i}"),
        }
    }
}

impl<T: Real> IndexMut<usize> for Vec3<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        match i {
            0 => &mut self.x,
            1 => &mut self.y,
            2 => &mut self.z,
            _ => panic!("Vec3 index out of range: {i}"),
        }
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> SubAssign for Vec3<T> {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Real> Div<T> for Vec3<T> {
    type Output = Self;
    fn div(self, s: T) -> Self {
        Self::new(self.x / s, self.y / s, self.z / s)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Row-major 3x3 matrix. Used for rotation matrices and inertia tensors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat3<T: Real> {
    pub rows: [Vec3<T>; 3],
}

impl<T: Real> Mat3<T> {
    pub fn identity() -> Self {
        Self {
            rows: [Vec3::unit_x(), Vec3::unit_y(), Vec3::unit_z()],
        }
    }

    pub fn from_rows(r0: Vec3<T>, r1: Vec3<T>, r2: Vec3<T>) -> Self {
        Self { rows: [r0, r1, r2] }
    }

    pub fn diagonal(d: Vec3<T>) -> Self {
        let z = T::zero();
        Self::from_rows(
            Vec3::new(d.x, z, z),
            Vec3::new(z, d.y, z),
            Vec3::new(z, z, d.z),
        )
    }

    /// Skew-symmetric matrix `[v]x` with `[v]x a = v × a`.
    pub fn skew(v: Vec3<T>) -> Self {
        let z = T::zero();
        Self::from_rows(
            Vec3::new(z, -v.z, v.y),
            Vec3::new(v.z, z, -v.x),
            Vec3::new(-v.y, v.x, z),
        )
    }

    #[inline]
    pub fn mul_vec(&self, v: Vec3<T>) -> Vec3<T> {
        Vec3::new(self.rows[0].dot(v), self.rows[1].dot(v), self.rows[2].dot(v))
    }

    pub fn mul_mat(&self, o: &Self) -> Self {
        let ot = o.transpose();
        Self::from_rows(
            Vec3::new(
                self.rows[0].dot(ot.rows[0]),
                self.rows[0].dot(ot.rows[1]),
                self.rows[0].dot(ot.rows[2]),
            ),
            Vec3::new(
                self.rows[1].dot(ot.rows[0]),
                self.rows[1].dot(ot.rows[1]),
                self.rows[1].dot(ot.rows[2]),
            ),
            Vec3::new(
                self.rows[2].dot(ot.rows[0]),
                self.rows[2].dot(ot.rows[1]),
                self.rows[2].dot(ot.rows[2]),
            ),
        )
    }

    pub fn transpose(&self) -> Self {
        Self::from_rows(
            Vec3::new(self.rows[0].x, self.rows[1].x, self.rows[2].x),
            Vec3::new(self.rows[0].y, self.rows[1].y, self.rows[2].y),
            Vec3::new(self.rows[0].z, self.rows[1].z, self.rows[2].z),
        )
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::from_rows(
            self.rows[0] + o.rows[0],
            self.rows[1] + o.rows[1],
            self.rows[2] + o.rows[2],
        )
    }

    pub fn scale(&self, s: T) -> Self {
        Self::from_rows(self.rows[0] * s, self.rows[1] * s, self.rows[2] * s)
    }

    pub fn trace(&self) -> T {
        self.rows[0].x + self.rows[1].y + self.rows[2].z
    }

    /// Inverse of a symmetric positive-definite 3x3 matrix via adjugate.
    pub fn inverse(&self) -> Self {
        let m = &self.rows;
        let c0 = m[1].y * m[2].z - m[1].z * m[2].y;
        let c1 = m[1].z * m[2].x - m[1].x * m[2].z;
        let c2 = m[1].x * m[2].y - m[1].y * m[2].x;
        let det = m[0].x * c0 + m[0].y * c1 + m[0].z * c2;
        let inv_det = T::one() / det;
        Self::from_rows(
            Vec3::new(
                c0,
                m[0].z * m[2].y - m[0].y * m[2].z,
                m[0].y * m[1].z - m[0].z * m[1].y,
            ) * inv_det,
            Vec3::new(
                c1,
                m[0].x * m[2].z - m[0].z * m[2].x,
                m[0].z * m[1].x - m[0].x * m[1].z,
            ) * inv_det,
            Vec3::new(
                c2,
                m[0].y * m[2].x - m[0].x * m[2].y,
                m[0].x * m[1].y - m[0].y * m[1].x,
            ) * inv_det,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_is_anticommutative() {
        let a = Vec3::new(1.0, 2.0, 3.0);
        let b = Vec3::new(-0.5, 0.25, 4.0);
        assert!((a.cross(b) + b.cross(a)).norm() < 1e-15);
    }

    #[test]
    fn mat3_inverse_roundtrip() {
        let m: Mat3<f64> = Mat3::from_rows(
            Vec3::new(2.0, 0.3, 0.1),
            Vec3::new(0.3, 1.5, -0.2),
            Vec3::new(0.1, -0.2, 3.0),
        );
        let id = m.mul_mat(&m.inverse());
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((id.rows[i][j] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn skew_matches_cross() {
        let v = Vec3::new(0.4, -1.2, 2.2);
        let a = Vec3::new(1.0, 0.5, -0.7);
        assert!((Mat3::skew(v).mul_vec(a) - v.cross(a)).norm() < 1e-15);
    }
}
