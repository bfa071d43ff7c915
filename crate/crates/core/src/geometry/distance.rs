use super::{ConvexPiece, Point};

/// Euclidean distance from `p` to the closed triangle `abc`.
///
/// Closest-feature classification over the triangle's Voronoi regions;
/// degenerate triangles fall back to the nearest edge.
pub fn point_triangle_distance(p: &Point, a: &Point, b: &Point, c: &Point) -> f64 {
    (p - closest_point_on_triangle(p, a, b, c)).norm()
}

pub(crate) fn closest_point_on_triangle(p: &Point, a: &Point, b: &Point, c: &Point) -> Point {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let denom = d1 - d3;
        if denom > 0.0 {
            return a + ab * (d1 / denom);
        }
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let denom = d2 - d6;
        if denom > 0.0 {
            return a + ac * (d2 / denom);
        }
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let denom = (d4 - d3) + (d5 - d6);
        if denom > 0.0 {
            return b + (c - b) * ((d4 - d3) / denom);
        }
    }
    let denom = va + vb + vc;
    if denom.abs() > f64::MIN_POSITIVE {
        let v = vb / denom;
        let w = vc / denom;
        return a + ab * v + ac * w;
    }
    // zero-area triangle: nearest point over the three edges
    [(a, b), (b, c), (c, a)]
        .into_iter()
        .map(|(s, e)| closest_point_on_segment(p, s, e))
        .min_by(|x, y| (p - x).norm_squared().total_cmp(&(p - y).norm_squared()))
        .expect("three edges")
}

fn closest_point_on_segment(p: &Point, a: &Point, b: &Point) -> Point {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return *a;
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

/// Signed distance of `p` to a convex hull: the maximum over face planes of
/// `n . p - d`. Positive outside, at most zero inside. For points outside
/// near an edge this underestimates the Euclidean distance, which is fine for
/// containment tests.
pub fn signed_distance_to_hull(p: &Point, piece: &ConvexPiece) -> f64 {
    piece
        .planes()
        .iter()
        .map(|(n, d)| n.dot(&p.coords) - d)
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regions() {
        let a = Point::new(0.0, 0.0, 0.0);
        let b = Point::new(1.0, 0.0, 0.0);
        let c = Point::new(0.0, 1.0, 0.0);
        let d = |p: Point| point_triangle_distance(&p, &a, &b, &c);
        assert!((d(Point::new(0.25, 0.25, 2.0)) - 2.0).abs() < 1e-15);
        assert!((d(Point::new(-1.0, -1.0, 0.0)) - 2f64.sqrt()).abs() < 1e-15);
        assert!((d(Point::new(0.5, -3.0, 0.0)) - 3.0).abs() < 1e-15);
        assert!((d(Point::new(1.0, 1.0, 0.0)) - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(d(Point::new(0.1, 0.1, 0.0)), 0.0);
    }

    #[test]
    fn degenerate_triangle_uses_edges() {
        let a = Point::new(0.0, 0.0, 0.0);
        let b = Point::new(2.0, 0.0, 0.0);
        let dist = point_triangle_distance(&Point::new(1.0, 1.0, 0.0), &a, &b, &b);
        assert!((dist - 1.0).abs() < 1e-15);
    }
}
