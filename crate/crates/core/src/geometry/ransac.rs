//! RANSAC plane detection with an orientation constraint.

use nalgebra::{Matrix3, SymmetricEigen};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Aabb, GeometryError, Point, Vec3};

/// cos(15 deg): a plane is horizontal when its normal is within 15 degrees
/// of the z axis (either sign).
const HORIZONTAL_MIN_ABS_NZ: f64 = 0.965_925_826_289_068_3;
/// sin(15 deg) = cos(75 deg): a plane is vertical when the angle between its
/// normal and z lies in [75, 105] degrees.
const VERTICAL_MAX_ABS_NZ: f64 = 0.258_819_045_102_520_8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RansacParams {
    /// Inlier distance threshold, meters.
    pub dist_thresh: f64,
    pub iters: usize,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            dist_thresh: 0.01,
            iters: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceConstraint {
    Horizontal,
    Vertical,
    Any,
}

impl SurfaceConstraint {
    pub fn accepts(self, normal: &Vec3) -> bool {
        match self {
            SurfaceConstraint::Horizontal => PlaneOrientation::of(normal) == PlaneOrientation::Horizontal,
            SurfaceConstraint::Vertical => PlaneOrientation::of(normal) == PlaneOrientation::Vertical,
            SurfaceConstraint::Any => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlaneOrientation {
    Horizontal,
    Vertical,
    Oblique,
}

impl PlaneOrientation {
    pub fn of(normal: &Vec3) -> Self {
        let nz = (normal.z / normal.norm()).abs();
        if nz >= HORIZONTAL_MIN_ABS_NZ {
            PlaneOrientation::Horizontal
        } else if nz <= VERTICAL_MAX_ABS_NZ {
            PlaneOrientation::Vertical
        } else {
            PlaneOrientation::Oblique
        }
    }
}

/// A detected plane `normal . x = offset` with its inlier points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneSurface {
    pub normal: Vec3,
    pub offset: f64,
    pub inlier_points: Vec<Point>,
    pub orientation: PlaneOrientation,
}

impl PlaneSurface {
    /// Builds a surface from a plane and its inliers, normalizing the normal
    /// and classifying the orientation.
    pub fn new(normal: Vec3, offset: f64, inlier_points: Vec<Point>) -> Self {
        let len = normal.norm();
        let normal = normal / len;
        Self {
            normal,
            offset: offset / len,
            orientation: PlaneOrientation::of(&normal),
            inlier_points,
        }
    }

    pub fn signed_distance(&self, p: &Point) -> f64 {
        self.normal.dot(&p.coords) - self.offset
    }

    pub fn inlier_mean(&self) -> Option<Point> {
        if self.inlier_points.is_empty() {
            return None;
        }
        let sum: Vec3 = self.inlier_points.iter().map(|p| p.coords).sum();
        Some(Point::from(sum / self.inlier_points.len() as f64))
    }

    /// Orthonormal in-plane basis `(u, v)` with `u x v = normal`. For a
    /// horizontal plane with normal +z this is (+x, +y).
    pub fn basis(&self) -> (Vec3, Vec3) {
        let n = self.normal;
        let reference = if n.x.abs() > 0.9 { Vec3::y() } else { Vec3::x() };
        let u = (reference - n * reference.dot(&n)).normalize();
        let v = n.cross(&u);
        (u, v)
    }

    /// In-plane coordinates of `p` (its projection onto the basis).
    pub fn to_plane_coords(&self, p: &Point) -> [f64; 2] {
        let (u, v) = self.basis();
        [u.dot(&p.coords), v.dot(&p.coords)]
    }

    /// The point on the plane with in-plane coordinates `uv`.
    pub fn from_plane_coords(&self, uv: [f64; 2]) -> Point {
        let (u, v) = self.basis();
        Point::from(self.normal * self.offset + u * uv[0] + v * uv[1])
    }

    /// 2D box of the inliers in plane coordinates: `([u_min, v_min], [u_max, v_max])`.
    pub fn plane_bounds(&self) -> Option<([f64; 2], [f64; 2])> {
        let mut it = self.inlier_points.iter().map(|p| self.to_plane_coords(p));
        let first = it.next()?;
        let (mut lo, mut hi) = (first, first);
        for uv in it {
            for k in 0..2 {
                lo[k] = lo[k].min(uv[k]);
                hi[k] = hi[k].max(uv[k]);
            }
        }
        Some((lo, hi))
    }

    /// Height of the plane above `(x, y)`; `None` for vertical planes.
    pub fn height_at(&self, x: f64, y: f64) -> Option<f64> {
        if self.normal.z.abs() < 1e-12 {
            return None;
        }
        Some((self.offset - self.normal.x * x - self.normal.y * y) / self.normal.z)
    }

    pub fn inlier_aabb(&self) -> Option<Aabb> {
        Aabb::from_points(&self.inlier_points)
    }
}

/// Flips `n` so its largest-magnitude component is positive.
fn canonical_sign(n: Vec3) -> Vec3 {
    let k = n.iamax();
    if n[k] < 0.0 {
        -n
    } else {
        n
    }
}

fn count_inliers(points: &[Point], n: &Vec3, offset: f64, thresh: f64) -> usize {
    points
        .iter()
        .filter(|p| (n.dot(&p.coords) - offset).abs() <= thresh)
        .count()
}

/// Least-squares plane through `points`: centroid plus the eigenvector of the
/// smallest covariance eigenvalue.
fn fit_plane(points: &[Point]) -> Option<(Vec3, f64)> {
    if points.len() < 3 {
        return None;
    }
    let centroid: Vec3 = points.iter().map(|p| p.coords).sum::<Vec3>() / points.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p.coords - centroid;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let k = eig.eigenvalues.imin();
    let n: Vec3 = eig.eigenvectors.column(k).into_owned();
    if !n.iter().all(|c| c.is_finite()) || n.norm() < 0.5 {
        return None;
    }
    let n = canonical_sign(n.normalize());
    Some((n, n.dot(&centroid)))
}

/// Minimum consensus: `max(10, ceil(1% of n))`, capped at the point count so
/// tiny inputs can still yield a plane that contains every point.
pub fn min_inliers(n: usize) -> usize {
    let one_percent = n.div_ceil(100);
    one_percent.max(10).min(n)
}

/// Detects the dominant plane satisfying `constraint`.
///
/// Hypotheses come from seeded random 3-point samples; the one with the most
/// inliers wins (ties keep the earliest). The winner is refined by a
/// least-squares fit over its inliers when that does not lose inliers.
pub fn ransac_plane(
    points: &[Point],
    params: &RansacParams,
    constraint: SurfaceConstraint,
) -> Result<PlaneSurface, GeometryError> {
    let n = points.len();
    if n < 3 {
        return Err(GeometryError::DegenerateInput(format!("{n} points, need at least 3")));
    }
    if all_collinear(points) {
        return Err(GeometryError::DegenerateInput("all points are collinear".into()));
    }
    let scale = points
        .iter()
        .flat_map(|p| p.iter())
        .fold(0.0f64, |m, c| m.max(c.abs()))
        .max(1e-300);
    let area_eps = 1e-12 * scale * scale;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(usize, Vec3, f64)> = None;
    for _ in 0..params.iters {
        let idx = sample(&mut rng, n, 3);
        let (a, b, c) = (points[idx.index(0)], points[idx.index(1)], points[idx.index(2)]);
        let cross = (b - a).cross(&(c - a));
        let len = cross.norm();
        if len <= area_eps {
            continue;
        }
        let normal = canonical_sign(cross / len);
        if !constraint.accepts(&normal) {
            continue;
        }
        let offset = normal.dot(&a.coords);
        let count = count_inliers(points, &normal, offset, params.dist_thresh);
        if best.as_ref().is_none_or(|(bc, _, _)| count > *bc) {
            best = Some((count, normal, offset));
        }
    }

    let needed = min_inliers(n);
    let (count, mut normal, mut offset) = match best {
        Some(b) if b.0 >= needed => b,
        Some((c, _, _)) => {
            return Err(GeometryError::NoPlaneFound(format!(
                "best {constraint:?} hypothesis has {c} inliers, need {needed}"
            )))
        }
        None => {
            return Err(GeometryError::NoPlaneFound(format!(
                "no sampled hypothesis satisfies the {constraint:?} constraint"
            )))
        }
    };

    let inliers: Vec<Point> = points
        .iter()
        .filter(|p| (normal.dot(&p.coords) - offset).abs() <= params.dist_thresh)
        .copied()
        .collect();
    if let Some((rn, ro)) = fit_plane(&inliers) {
        if constraint.accepts(&rn) && count_inliers(points, &rn, ro, params.dist_thresh) >= count {
            normal = rn;
            offset = ro;
        }
    }
    let inliers = points
        .iter()
        .filter(|p| (normal.dot(&p.coords) - offset).abs() <= params.dist_thresh)
        .copied()
        .collect();
    Ok(PlaneSurface::new(normal, offset, inliers))
}

fn all_collinear(points: &[Point]) -> bool {
    let p0 = points[0];
    let far = points
        .iter()
        .max_by(|a, b| (*a - p0).norm_squared().total_cmp(&(*b - p0).norm_squared()))
        .expect("nonempty");
    let dir = far - p0;
    let len = dir.norm();
    if len == 0.0 {
        return true;
    }
    let tol = 1e-12 * len;
    points.iter().all(|p| dir.cross(&(p - p0)).norm() / len <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn square_x0() -> Vec<Point> {
        vec![
            Point::new(0.0, 0.0, 0.0),
            Point::new(0.0, 1.0, 0.0),
            Point::new(0.0, 1.0, 1.0),
            Point::new(0.0, 0.0, 1.0),
        ]
    }

    #[test]
    fn vertical_unit_square() {
        let s = ransac_plane(&square_x0(), &RansacParams::default(), SurfaceConstraint::Vertical).unwrap();
        assert!((s.normal - Vec3::x()).norm() < 1e-12);
        assert_eq!(s.inlier_points.len(), 4);
        assert_eq!(s.orientation, PlaneOrientation::Vertical);
    }

    #[test]
    fn constraint_excludes_only_plane() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Point> = (0..200)
            .map(|_| Point::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), 0.0))
            .collect();
        let err = ransac_plane(&pts, &RansacParams::default(), SurfaceConstraint::Vertical).unwrap_err();
        assert!(matches!(err, GeometryError::NoPlaneFound(_)));
    }

    #[test]
    fn degenerate_inputs() {
        let two = [Point::origin(), Point::new(1.0, 0.0, 0.0)];
        assert!(matches!(
            ransac_plane(&two, &RansacParams::default(), SurfaceConstraint::Any),
            Err(GeometryError::DegenerateInput(_))
        ));
        let line: Vec<Point> = (0..20).map(|i| Point::new(i as f64, 2.0 * i as f64, 0.5)).collect();
        assert!(matches!(
            ransac_plane(&line, &RansacParams::default(), SurfaceConstraint::Any),
            Err(GeometryError::DegenerateInput(_))
        ));
    }

    #[test]
    fn seed_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts: Vec<Point> = (0..300)
            .map(|_| Point::new(rng.gen(), rng.gen(), rng.gen::<f64>() * 0.3))
            .collect();
        let p = RansacParams { seed: 77, ..Default::default() };
        let a = ransac_plane(&pts, &p, SurfaceConstraint::Any).unwrap();
        let b = ransac_plane(&pts, &p, SurfaceConstraint::Any).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn min_inliers_rule() {
        assert_eq!(min_inliers(4), 4);
        assert_eq!(min_inliers(100), 10);
        assert_eq!(min_inliers(1100), 11);
        assert_eq!(min_inliers(5000), 50);
    }

    #[test]
    fn plane_coords_round_trip() {
        let s = PlaneSurface::new(Vec3::new(0.0, 0.0, 2.0), 1.6, vec![]);
        assert_eq!(s.basis(), (Vec3::x(), Vec3::y()));
        let p = s.from_plane_coords([0.3, -1.2]);
        assert!((p - Point::new(0.3, -1.2, 0.8)).norm() < 1e-15);
        assert_eq!(s.height_at(5.0, 5.0), Some(0.8));
    }
}
