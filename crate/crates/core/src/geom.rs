//! Ground-plane geometry in meters.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::num::Real;

/// A 2-D ground-plane point (or displacement) in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    pub fn distance(self, other: Self) -> T {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Linear interpolation: `self` at `t = 0`, `other` at `t = 1`.
    pub fn lerp(self, other: Self, t: T) -> Self {
        self + (other - self) * t
    }
}

impl<T: Real> Add for Point2<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl<T: Real> Sub for Point2<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl<T: Real> Mul<T> for Point2<T> {
    type Output = Self;
    fn mul(self, rhs: T) -> Self {
        Self::new(self.x * rhs, self.y * rhs)
    }
}

/// Axis-aligned rectangle: the camera field of view on the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect<T> {
    pub min_x: T,
    pub min_y: T,
    pub max_x: T,
    pub max_y: T,
}

impl<T: Real> Rect<T> {
    pub fn new(min_x: T, min_y: T, max_x: T, max_y: T) -> Self {
        Self {
            min_x,
            min_y,
            max_x,
            max_y,
        }
    }

    pub fn width(&self) -> T {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> T {
        self.max_y - self.min_y
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.width() > T::zero() && self.height() > T::zero())
    }

    pub fn contains(&self, p: Point2<T>) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    pub fn clamp(&self, p: Point2<T>) -> Point2<T> {
        Point2::new(
            p.x.max(self.min_x).min(self.max_x),
            p.y.max(self.min_y).min(self.max_y),
        )
    }

    /// Smallest distance from `p` to any of the four edges (zero outside).
    pub fn edge_distance(&self, p: Point2<T>) -> T {
        if !self.contains(p) {
            return T::zero();
        }
        (p.x - self.min_x)
            .min(self.max_x - p.x)
            .min(p.y - self.min_y)
            .min(self.max_y - p.y)
    }

    pub fn center(&self) -> Point2<T> {
        let half = T::lit(0.5);
        Point2::new(
            (self.min_x + self.max_x) * half,
            (self.min_y + self.max_y) * half,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_distance_and_contains() {
        let r = Rect::new(0.0, 0.0, 10.0, 10.0);
        assert_eq!(r.edge_distance(Point2::new(0.2, 5.0)), 0.2);
        assert_eq!(r.edge_distance(Point2::new(5.0, 5.0)), 5.0);
        assert_eq!(r.edge_distance(Point2::new(-1.0, 5.0)), 0.0);
        assert!(r.contains(Point2::new(10.0, 10.0)));
        assert!(!r.contains(Point2::new(10.1, 10.0)));
    }

    #[test]
    fn lerp_endpoints() {
        let a = Point2::new(0.0f32, 0.0);
        let b = Point2::new(4.0f32, 2.0);
        assert_eq!(a.lerp(b, 0.0), a);
        assert_eq!(a.lerp(b, 1.0), b);
        assert_eq!(a.lerp(b, 0.5), Point2::new(2.0, 1.0));
    }
}
