use std::ops::Mul;

use super::Vec3;
use crate::real::Real;

/// Hamilton quaternion, scalar first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quat<T> {
    pub w: T,
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Default for Quat<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> Quat<T> {
    pub const fn new(w: T, x: T, y: T, z: T) -> Self {
        Self { w, x, y, z }
    }

    pub fn identity() -> Self {
        Self::new(T::one(), T::zero(), T::zero(), T::zero())
    }

    pub fn from_slice(s: &[T]) -> Self {
        Self::new(s[0], s[1], s[2], s[3])
    }

    pub fn to_array(self) -> [T; 4] {
        [self.w, self.x, self.y, self.z]
    }

    /// Pure quaternion `(0, v)`.
    pub fn pure(v: Vec3<T>) -> Self {
        Self::new(T::zero(), v.x, v.y, v.z)
    }

    pub fn vector(self) -> Vec3<T> {
        Vec3::new(self.x, self.y, self.z)
    }

    /// Rotation by `angle` radians about `axis` (need not be unit length).
    pub fn from_axis_angle(axis: Vec3<T>, angle: T) -> Self {
        let half = angle * T::lit(0.5);
        let a = axis.normalized().scale(half.sin());
        Self::new(half.cos(), a.x, a.y, a.z)
    }

    /// Exponential map of a rotation vector (axis times angle).
    pub fn from_rotation_vector(rv: Vec3<T>) -> Self {
        let angle = rv.norm();
        if angle == T::zero() {
            return Self::identity();
        }
        Self::from_axis_angle(rv, angle)
    }

    /// Shortest-arc rotation taking unit vector `from` onto unit vector `to`.
    pub fn between(from: Vec3<T>, to: Vec3<T>) -> Self {
        let c = from.cross(to);
        Self::new(T::one() + from.dot(to), c.x, c.y, c.z).normalized()
    }

    pub fn conj(self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn norm(self) -> T {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        Self::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    pub fn scale(self, k: T) -> Self {
        Self::new(self.w * k, self.x * k, self.y * k, self.z * k)
    }

    /// Rotates `v` by this (unit) quaternion: `q v q*`.
    pub fn rotate(self, v: Vec3<T>) -> Vec3<T> {
        let u = self.vector();
        let t = u.cross(v).scale(T::lit(2.0));
        v + t.scale(self.w) + u.cross(t)
    }

    /// Rotates by the inverse of this (unit) quaternion.
    pub fn inverse_rotate(self, v: Vec3<T>) -> Vec3<T> {
        self.conj().rotate(v)
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(self) -> T {
        let q = self.normalized();
        T::lit(2.0) * q.vector().norm().atan2(q.w.abs())
    }

    /// Angle of the relative rotation between two orientations.
    pub fn angle_to(self, other: Self) -> T {
        (self.conj() * other).angle()
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl<T: Real> Mul for Quat<T> {
    type Output = Self;

    fn mul(self, b: Self) -> Self {
        let a = self;
        Self::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }
}
