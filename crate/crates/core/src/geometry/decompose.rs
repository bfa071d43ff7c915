//! Approximate convex decomposition by recursive axis-aligned splitting.
//!
//! A cluster of source faces is hulled and scored by its concavity, the
//! larger of (a) the deepest source surface sample below the hull surface and
//! (b) the farthest hull surface sample from the source surface. (b) is what
//! exposes open cavities such as a drawer tray, whose walls all lie on their
//! own hull. The most concave cluster is split by the axis-aligned plane
//! through its face-centroid mean, perpendicular to its longest box axis,
//! until every cluster is under the threshold or a limit is hit.

use serde::{Deserialize, Serialize};

use super::distance::point_triangle_distance;
use super::{quickhull, signed_distance_to_hull, Aabb, ConvexPiece, Point, Vec3};
use crate::scene::TriMesh;

/// Half-thickness of the slab hull built for planar clusters.
const SLAB_HALF_THICKNESS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionParams {
    /// Maximum accepted concavity, meters.
    pub concavity_thresh: f64,
    pub max_pieces: usize,
    pub max_depth: usize,
}

impl Default for DecompositionParams {
    fn default() -> Self {
        Self {
            concavity_thresh: 0.02,
            max_pieces: 64,
            max_depth: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub pieces: Vec<ConvexPiece>,
    /// Concavity of each piece, same order as `pieces`.
    pub concavity: Vec<f64>,
    /// Some piece is still above the threshold because a depth or piece
    /// limit stopped the recursion.
    pub limited: bool,
}

struct Cluster {
    faces: Vec<u32>,
    loose: Vec<u32>,
    depth: usize,
    hull: ConvexPiece,
    concavity: f64,
    splittable: bool,
}

pub fn convex_decompose(mesh: &TriMesh, params: &DecompositionParams) -> Decomposition {
    let mut used = vec![false; mesh.vertex_count()];
    for f in mesh.faces() {
        for &v in f {
            used[v as usize] = true;
        }
    }
    let loose: Vec<u32> = (0..mesh.vertex_count() as u32).filter(|&v| !used[v as usize]).collect();
    let all: Vec<u32> = (0..mesh.face_count() as u32).collect();
    let mut clusters = vec![make_cluster(mesh, all, loose, 0)];

    let limited;
    loop {
        let pick = clusters
            .iter()
            .enumerate()
            .filter(|(_, c)| c.concavity > params.concavity_thresh && c.splittable)
            .max_by(|(i, a), (j, b)| a.concavity.total_cmp(&b.concavity).then(j.cmp(i)))
            .map(|(i, _)| i);
        let Some(i) = pick else {
            limited = clusters.iter().any(|c| c.concavity > params.concavity_thresh);
            break;
        };
        if clusters[i].depth >= params.max_depth {
            clusters[i].splittable = false;
            continue;
        }
        if clusters.len() >= params.max_pieces {
            limited = true;
            break;
        }
        match split(mesh, &clusters[i]) {
            Some((left, right)) => {
                clusters.splice(i..=i, [left, right]);
            }
            None => clusters[i].splittable = false,
        }
    }

    let concavity = clusters.iter().map(|c| c.concavity).collect();
    let pieces = clusters
        .into_iter()
        .map(|c| ConvexPiece {
            source_faces: c.faces,
            ..c.hull
        })
        .collect();
    Decomposition {
        pieces,
        concavity,
        limited,
    }
}

/// True if `p` is within `tol` of the inside of any piece.
pub fn point_in_hull(pieces: &[ConvexPiece], p: &Point, tol: f64) -> bool {
    pieces.iter().any(|h| signed_distance_to_hull(p, h) <= tol)
}

fn cluster_points(mesh: &TriMesh, faces: &[u32], loose: &[u32]) -> Vec<Point> {
    let mut idx: Vec<u32> = faces
        .iter()
        .flat_map(|&f| mesh.faces()[f as usize])
        .chain(loose.iter().copied())
        .collect();
    idx.sort_unstable();
    idx.dedup();
    idx.into_iter().map(|v| mesh.vertices()[v as usize]).collect()
}

fn make_cluster(mesh: &TriMesh, faces: Vec<u32>, loose: Vec<u32>, depth: usize) -> Cluster {
    let points = cluster_points(mesh, &faces, &loose);
    let hull = hull_or_slab(&points);
    let concavity = concavity(mesh, &faces, &points, &hull);
    Cluster {
        splittable: faces.len() > 1,
        faces,
        loose,
        depth,
        hull,
        concavity,
    }
}

/// Quickhull, or for flat/degenerate point sets a thin hull that still
/// contains every point: a slab around the best-fit plane, else a tiny box.
fn hull_or_slab(points: &[Point]) -> ConvexPiece {
    if points.is_empty() {
        return ConvexPiece::from_box(&Aabb::new(Point::origin(), Point::origin()).inflate(SLAB_HALF_THICKNESS));
    }
    if let Ok(h) = quickhull(points) {
        return h;
    }
    if let Some(n) = plane_normal(points) {
        let mut thick = Vec::with_capacity(points.len() * 2);
        for p in points {
            thick.push(p + n * SLAB_HALF_THICKNESS);
            thick.push(p - n * SLAB_HALF_THICKNESS);
        }
        if let Ok(h) = quickhull(&thick) {
            return h;
        }
    }
    let b = Aabb::from_points(points).expect("nonempty");
    ConvexPiece::from_box(&b.inflate(SLAB_HALF_THICKNESS))
}

fn plane_normal(points: &[Point]) -> Option<Vec3> {
    let p0 = points[0];
    let far = points
        .iter()
        .max_by(|a, b| (*a - p0).norm_squared().total_cmp(&(*b - p0).norm_squared()))?;
    let dir = far - p0;
    let best = points
        .iter()
        .map(|p| dir.cross(&(p - p0)))
        .max_by(|a, b| a.norm_squared().total_cmp(&b.norm_squared()))?;
    let len = best.norm();
    (len > 1e-12 * dir.norm_squared().max(f64::MIN_POSITIVE)).then(|| best / len)
}

fn concavity(mesh: &TriMesh, faces: &[u32], points: &[Point], hull: &ConvexPiece) -> f64 {
    if faces.is_empty() {
        return 0.0;
    }
    // (a) source surface below the hull surface
    let mut depth = 0.0f64;
    let source_samples = points.iter().copied().chain(faces.iter().map(|&f| {
        let [a, b, c] = mesh.triangle(f as usize);
        Point::from((a.coords + b.coords + c.coords) / 3.0)
    }));
    for p in source_samples {
        depth = depth.max(-signed_distance_to_hull(&p, hull));
    }
    // (b) hull surface away from the source surface
    let tris: Vec<[Point; 3]> = faces.iter().map(|&f| mesh.triangle(f as usize)).collect();
    let mut gap = 0.0f64;
    for hf in &hull.hull_faces {
        let [a, b, c] = hf.map(|i| hull.hull_vertices[i as usize]);
        for s in hull_face_samples(&a, &b, &c) {
            let d = tris
                .iter()
                .map(|t| point_triangle_distance(&s, &t[0], &t[1], &t[2]))
                .fold(f64::INFINITY, f64::min);
            gap = gap.max(d);
        }
    }
    depth.max(gap)
}

/// Barycentric samples on a hull face: corners, edge midpoints, centroid and
/// the centroids of the four midpoint sub-triangles.
fn hull_face_samples(a: &Point, b: &Point, c: &Point) -> [Point; 10] {
    let m = |p: &Point, q: &Point| nalgebra::center(p, q);
    let (ab, bc, ca) = (m(a, b), m(b, c), m(c, a));
    let centroid = |p: &Point, q: &Point, r: &Point| Point::from((p.coords + q.coords + r.coords) / 3.0);
    [
        *a,
        *b,
        *c,
        ab,
        bc,
        ca,
        centroid(a, b, c),
        centroid(a, &ab, &ca),
        centroid(&ab, b, &bc),
        centroid(&ca, &bc, c),
    ]
}

fn split(mesh: &TriMesh, c: &Cluster) -> Option<(Cluster, Cluster)> {
    let centroids: Vec<Point> = c
        .faces
        .iter()
        .map(|&f| {
            let [a, b, cc] = mesh.triangle(f as usize);
            Point::from((a.coords + b.coords + cc.coords) / 3.0)
        })
        .collect();
    let bounds = Aabb::from_points(&centroids)?;
    let mean: Vec3 = centroids.iter().map(|p| p.coords).sum::<Vec3>() / centroids.len() as f64;
    let extent = bounds.extent();
    let mut axes = [0usize, 1, 2];
    axes.sort_by(|&i, &j| extent[j].total_cmp(&extent[i]).then(i.cmp(&j)));
    for axis in axes {
        let cut = mean[axis];
        let (mut left, mut right) = (Vec::new(), Vec::new());
        for (k, &f) in c.faces.iter().enumerate() {
            if centroids[k][axis] < cut {
                left.push(f);
            } else {
                right.push(f);
            }
        }
        if left.is_empty() || right.is_empty() {
            continue;
        }
        let (mut loose_l, mut loose_r) = (Vec::new(), Vec::new());
        for &v in &c.loose {
            if mesh.vertices()[v as usize][axis] < cut {
                loose_l.push(v);
            } else {
                loose_r.push(v);
            }
        }
        return Some((
            make_cluster(mesh, left, loose_l, c.depth + 1),
            make_cluster(mesh, right, loose_r, c.depth + 1),
        ));
    }
    None
}
