use serde::{Deserialize, Serialize};

use super::{Point, Vec3};

/// Axis-aligned bounding box, `min <= max` componentwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    /// Builds a box from two corners, reordering components as needed.
    pub fn new(a: Point, b: Point) -> Self {
        Self {
            min: a.inf(&b),
            max: a.sup(&b),
        }
    }

    pub fn from_center_extent(center: Point, extent: Vec3) -> Self {
        let half = extent.abs() * 0.5;
        Self {
            min: center - half,
            max: center + half,
        }
    }

    /// Tight box around `points`; `None` when the iterator is empty.
    pub fn from_points<'a, I>(points: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a Point>,
    {
        let mut iter = points.into_iter();
        let first = *iter.next()?;
        let mut b = Self {
            min: first,
            max: first,
        };
        for p in iter {
            b.min = b.min.inf(p);
            b.max = b.max.sup(p);
        }
        Some(b)
    }

    pub fn center(&self) -> Point {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn inflate(&self, margin: f64) -> Aabb {
        let m = Vec3::repeat(margin);
        Aabb {
            min: self.min - m,
            max: self.max + m,
        }
    }

    pub fn translate(&self, t: &Vec3) -> Aabb {
        Aabb {
            min: self.min + t,
            max: self.max + t,
        }
    }

    pub fn contains_point(&self, p: &Point) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn contains(&self, other: &Aabb) -> bool {
        self.contains_point(&other.min) && self.contains_point(&other.max)
    }
}

/// True iff the two boxes, each grown by `margin` on every side, intersect
/// on all three axes. Touching boxes count as overlapping.
pub fn aabb_overlap(a: &Aabb, b: &Aabb, margin: f64) -> bool {
    debug_assert!(margin >= 0.0);
    (0..3).all(|i| a.min[i] - margin <= b.max[i] + margin && b.min[i] - margin <= a.max[i] + margin)
}
