//! Analytic occluder primitives and their segment intersection kernels.

use glam::{DVec2, DVec3};
use serde::{Deserialize, Serialize};

/// Axis-aligned ground rectangle (meters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub min: DVec2,
    pub max: DVec2,
}

impl Rect {
    pub fn new(min: DVec2, max: DVec2) -> Self {
        Rect { min, max }
    }

    /// `width × height` rectangle centred on the origin.
    pub fn centered(width: f64, height: f64) -> Self {
        let half = DVec2::new(width, height) * 0.5;
        Rect {
            min: -half,
            max: half,
        }
    }

    pub fn around(center: DVec2, width: f64, height: f64) -> Self {
        let half = DVec2::new(width, height) * 0.5;
        Rect {
            min: center - half,
            max: center + half,
        }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn center(&self) -> DVec2 {
        (self.min + self.max) * 0.5
    }

    pub fn is_empty(&self) -> bool {
        !(self.max.x > self.min.x && self.max.y > self.min.y)
    }

    pub fn contains(&self, p: DVec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        self.contains(other.min) && self.contains(other.max)
    }

    /// Shrinks every side by `margin`; may produce an empty rectangle.
    pub fn shrink(&self, margin: f64) -> Rect {
        Rect {
            min: self.min + DVec2::splat(margin),
            max: self.max - DVec2::splat(margin),
        }
    }

    pub fn grow(&self, margin: f64) -> Rect {
        self.shrink(-margin)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: DVec3,
    pub max: DVec3,
}

impl Aabb {
    pub const EMPTY: Aabb = Aabb {
        min: DVec3::splat(f64::INFINITY),
        max: DVec3::splat(f64::NEG_INFINITY),
    };

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.min(other.min),
            max: self.max.max(other.max),
        }
    }

    pub fn center(&self) -> DVec3 {
        (self.min + self.max) * 0.5
    }

    pub fn surface_area(&self) -> f64 {
        let e = (self.max - self.min).max(DVec3::ZERO);
        2.0 * (e.x * e.y + e.y * e.z + e.z * e.x)
    }

    /// Slab test against the parametric interval `(t_min, t_max)`.
    #[inline]
    pub fn hit(&self, origin: DVec3, inv_dir: DVec3, t_min: f64, t_max: f64) -> bool {
        let t0 = (self.min - origin) * inv_dir;
        let t1 = (self.max - origin) * inv_dir;
        let near = t0.min(t1).max_element().max(t_min);
        let far = t0.max(t1).min_element().min(t_max);
        near <= far
    }
}

/// Solid finite cylinder between two axis end points, capped at both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub base: DVec3,
    pub top: DVec3,
    pub radius: f64,
}

/// Zero-thickness opaque disc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: DVec3,
    pub normal: DVec3,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Primitive {
    Cylinder(Cylinder),
    Disc(Disc),
}

const PARALLEL_EPS: f64 = 1e-12;

/// Intersects `[lo, hi]` with the solution set of `a t² + b t + c <= 0`.
fn clip_quadratic(a: f64, b: f64, c: f64, lo: &mut f64, hi: &mut f64) -> bool {
    if a < PARALLEL_EPS {
        // Moving (almost) parallel to the axis: radial distance is constant.
        return c <= 0.0;
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return false;
    }
    let root = disc.sqrt();
    // Numerically stable pair of roots.
    let q = -0.5 * (b + b.signum() * root);
    let (mut t1, mut t2) = if q == 0.0 {
        (0.0, 0.0)
    } else {
        (q / a, c / q)
    };
    if t1 > t2 {
        std::mem::swap(&mut t1, &mut t2);
    }
    *lo = lo.max(t1);
    *hi = hi.min(t2);
    *lo < *hi
}

impl Cylinder {
    pub fn axis_length(&self) -> f64 {
        (self.top - self.base).length()
    }

    pub fn bounds(&self) -> Aabb {
        let axis = self.top - self.base;
        let len2 = axis.length_squared();
        let extent = if len2 > 0.0 {
            let w2 = axis * axis / len2;
            (DVec3::ONE - w2).max(DVec3::ZERO).map(f64::sqrt) * self.radius
        } else {
            DVec3::splat(self.radius)
        };
        Aabb {
            min: self.base.min(self.top) - extent,
            max: self.base.max(self.top) + extent,
        }
    }

    /// True when the line `origin + t dir`, `t ∈ (t_min, t_max)`, enters the
    /// solid cylinder.
    pub fn intersects(&self, origin: DVec3, dir: DVec3, t_min: f64, t_max: f64) -> bool {
        let axis = self.top - self.base;
        let len = axis.length();
        if len == 0.0 {
            return false;
        }
        let w = axis / len;
        let m = origin - self.base;
        let s0 = m.dot(w);
        let ds = dir.dot(w);

        let mut lo = t_min;
        let mut hi = t_max;
        // Axial slab 0 <= s <= len.
        if ds.abs() < PARALLEL_EPS {
            if s0 < 0.0 || s0 > len {
                return false;
            }
        } else {
            let ta = -s0 / ds;
            let tb = (len - s0) / ds;
            lo = lo.max(ta.min(tb));
            hi = hi.min(ta.max(tb));
            if lo >= hi {
                return false;
            }
        }
        let m_perp = m - w * s0;
        let d_perp = dir - w * ds;
        let a = d_perp.length_squared();
        let b = 2.0 * m_perp.dot(d_perp);
        let c = m_perp.length_squared() - self.radius * self.radius;
        clip_quadratic(a, b, c, &mut lo, &mut hi)
    }

    pub fn contains_point(&self, p: DVec3) -> bool {
        let axis = self.top - self.base;
        let len = axis.length();
        if len == 0.0 {
            return false;
        }
        let w = axis / len;
        let m = p - self.base;
        let s = m.dot(w);
        s >= 0.0 && s <= len && (m - w * s).length_squared() <= self.radius * self.radius
    }

    /// Horizontal distance from the vertical line through `axis_xy` to the
    /// farthest point of the cylinder.
    pub fn max_radial_extent(&self, axis_xy: DVec2) -> f64 {
        let b = (self.base.truncate() - axis_xy).length();
        let t = (self.top.truncate() - axis_xy).length();
        b.max(t) + self.radius
    }
}

impl Disc {
    pub fn bounds(&self) -> Aabb {
        let n = self.normal.normalize_or_zero();
        let extent = (DVec3::ONE - n * n).max(DVec3::ZERO).map(f64::sqrt) * self.radius;
        Aabb {
            min: self.center - extent,
            max: self.center + extent,
        }
    }

    pub fn intersects(&self, origin: DVec3, dir: DVec3, t_min: f64, t_max: f64) -> bool {
        let denom = self.normal.dot(dir);
        if denom.abs() < PARALLEL_EPS {
            return false;
        }
        let t = self.normal.dot(self.center - origin) / denom;
        if !(t > t_min && t < t_max) {
            return false;
        }
        let p = origin + dir * t;
        (p - self.center).length_squared() <= self.radius * self.radius
    }
}

impl Primitive {
    pub fn bounds(&self) -> Aabb {
        match self {
            Primitive::Cylinder(c) => c.bounds(),
            Primitive::Disc(d) => d.bounds(),
        }
    }

    #[inline]
    pub fn intersects(&self, origin: DVec3, dir: DVec3, t_min: f64, t_max: f64) -> bool {
        match self {
            Primitive::Cylinder(c) => c.intersects(origin, dir, t_min, t_max),
            Primitive::Disc(d) => d.intersects(origin, dir, t_min, t_max),
        }
    }

    pub fn translated(&self, offset: DVec3) -> Primitive {
        match *self {
            Primitive::Cylinder(c) => Primitive::Cylinder(Cylinder {
                base: c.base + offset,
                top: c.top + offset,
                radius: c.radius,
            }),
            Primitive::Disc(d) => Primitive::Disc(Disc {
                center: d.center + offset,
                ..d
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trunk() -> Cylinder {
        Cylinder {
            base: DVec3::ZERO,
            top: DVec3::new(0.0, 0.0, 6.0),
            radius: 0.3,
        }
    }

    #[test]
    fn vertical_ray_through_axis_hits() {
        let o = DVec3::new(0.0, 0.0, 30.0);
        assert!(trunk().intersects(o, DVec3::NEG_Z, 0.0, 30.0));
    }

    #[test]
    fn lateral_miss() {
        let o = DVec3::new(5.0, 0.0, 30.0);
        assert!(!trunk().intersects(o, DVec3::NEG_Z, 0.0, 30.0));
    }

    #[test]
    fn segment_stopping_short_misses() {
        let o = DVec3::new(0.0, 0.0, 30.0);
        assert!(!trunk().intersects(o, DVec3::NEG_Z, 0.0, 23.0));
        assert!(trunk().intersects(o, DVec3::NEG_Z, 0.0, 24.5));
    }

    #[test]
    fn horizontal_ray_hits_side() {
        let o = DVec3::new(-5.0, 0.1, 3.0);
        assert!(trunk().intersects(o, DVec3::X, 0.0, 10.0));
        assert!(!trunk().intersects(o, DVec3::X, 0.0, 4.0));
        let above = DVec3::new(-5.0, 0.0, 6.5);
        assert!(!trunk().intersects(above, DVec3::X, 0.0, 10.0));
    }

    #[test]
    fn tilted_cylinder_bounds_contain_ends() {
        let c = Cylinder {
            base: DVec3::new(1.0, 2.0, 3.0),
            top: DVec3::new(4.0, -1.0, 7.0),
            radius: 0.2,
        };
        let b = c.bounds();
        for p in [c.base, c.top] {
            assert!(p.cmpge(b.min).all() && p.cmple(b.max).all());
        }
    }

    #[test]
    fn disc_hit_and_miss() {
        let d = Disc {
            center: DVec3::new(0.0, 0.0, 10.0),
            normal: DVec3::Z,
            radius: 2.0,
        };
        let o = DVec3::new(1.5, 0.0, 30.0);
        assert!(d.intersects(o, DVec3::NEG_Z, 0.0, 30.0));
        let o = DVec3::new(2.5, 0.0, 30.0);
        assert!(!d.intersects(o, DVec3::NEG_Z, 0.0, 30.0));
        // Edge-on rays never hit a zero-thickness disc.
        let o = DVec3::new(-5.0, 0.0, 10.0);
        assert!(!d.intersects(o, DVec3::X, 0.0, 10.0));
    }

    #[test]
    fn rect_ops() {
        let r = Rect::centered(10.0, 4.0);
        assert_eq!(r.area(), 40.0);
        assert!(r.shrink(2.5).is_empty());
        assert!(!r.shrink(1.0).is_empty());
        assert!(r.contains(DVec2::new(5.0, 2.0)));
        assert!(!r.contains(DVec2::new(5.1, 0.0)));
    }
}
