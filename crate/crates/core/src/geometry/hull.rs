//! 3D quickhull.
//!
//! Incremental hull over outside sets: each live face owns the points that
//! see it; the farthest such point is added by carving out the connected set
//! of faces it sees and fanning the horizon to it.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Aabb, GeometryError, Point, Vec3};

/// A convex polytope as a triangle mesh with outward-facing faces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexPiece {
    pub hull_vertices: Vec<Point>,
    pub hull_faces: Vec<[u32; 3]>,
    /// Faces of the source mesh this piece covers (empty for a plain hull).
    pub source_faces: Vec<u32>,
}

impl ConvexPiece {
    /// Outward unit normal and offset of every face plane (`n . x = d`).
    pub fn planes(&self) -> Vec<(Vec3, f64)> {
        self.hull_faces
            .iter()
            .filter_map(|f| {
                let [a, b, c] = f.map(|i| self.hull_vertices[i as usize]);
                let n = (b - a).cross(&(c - a));
                let len = n.norm();
                (len > 0.0).then(|| {
                    let n = n / len;
                    (n, n.dot(&a.coords))
                })
            })
            .collect()
    }

    pub fn contains(&self, p: &Point, tol: f64) -> bool {
        self.planes().iter().all(|(n, d)| n.dot(&p.coords) - d <= tol)
    }

    /// Largest amount by which any hull vertex lies outside any face plane.
    pub fn convexity_violation(&self) -> f64 {
        let planes = self.planes();
        self.hull_vertices
            .iter()
            .flat_map(|p| planes.iter().map(move |(n, d)| n.dot(&p.coords) - d))
            .fold(0.0, f64::max)
    }

    pub fn volume(&self) -> f64 {
        let origin = self.hull_vertices.first().copied().unwrap_or_else(Point::origin);
        self.hull_faces
            .iter()
            .map(|f| {
                let [a, b, c] = f.map(|i| self.hull_vertices[i as usize] - origin);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    pub fn aabb(&self) -> Option<Aabb> {
        Aabb::from_points(&self.hull_vertices)
    }

    /// The box itself as a hull (8 corners, 12 faces).
    pub fn from_box(b: &Aabb) -> Self {
        let (lo, hi) = (b.min, b.max);
        let hull_vertices = (0..8)
            .map(|i| {
                Point::new(
                    if i & 1 == 0 { lo.x } else { hi.x },
                    if i & 2 == 0 { lo.y } else { hi.y },
                    if i & 4 == 0 { lo.z } else { hi.z },
                )
            })
            .collect();
        let hull_faces = vec![
            [0, 2, 1], [1, 2, 3], // -z
            [4, 5, 6], [5, 7, 6], // +z
            [0, 1, 4], [1, 5, 4], // -y
            [2, 6, 3], [3, 6, 7], // +y
            [0, 4, 2], [2, 4, 6], // -x
            [1, 3, 5], [3, 7, 5], // +x
        ];
        Self {
            hull_vertices,
            hull_faces,
            source_faces: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
struct Face {
    v: [usize; 3],
    normal: Vec3,
    offset: f64,
    outside: Vec<usize>,
    alive: bool,
}

impl Face {
    fn new(points: &[Point], v: [usize; 3]) -> Self {
        let [a, b, c] = v.map(|i| points[i]);
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        let normal = if len > 0.0 { n / len } else { Vec3::zeros() };
        Face {
            v,
            normal,
            offset: normal.dot(&a.coords),
            outside: Vec::new(),
            alive: true,
        }
    }

    fn distance(&self, p: &Point) -> f64 {
        self.normal.dot(&p.coords) - self.offset
    }
}

/// Hull distance tolerance: points within this of a face plane count as on it.
fn tolerance(points: &[Point]) -> f64 {
    let max_abs = points
        .iter()
        .flat_map(|p| p.iter())
        .fold(0.0f64, |m, c| m.max(c.abs()));
    (1e-11 * max_abs).max(1e-14)
}

pub fn quickhull(points: &[Point]) -> Result<ConvexPiece, GeometryError> {
    if points.len() < 4 {
        return Err(GeometryError::DegenerateInput(format!(
            "{} points, need at least 4",
            points.len()
        )));
    }
    if let Some(i) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(GeometryError::DegenerateInput(format!("point {i} is not finite")));
    }
    let eps = tolerance(points);
    let simplex = initial_simplex(points, eps)?;

    let mut faces: Vec<Face> = Vec::new();
    let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
    let centroid = Point::from(simplex.iter().map(|&i| points[i].coords).sum::<Vec3>() / 4.0);
    for skip in 0..4 {
        let mut v: Vec<usize> = (0..4).filter(|&k| k != skip).map(|k| simplex[k]).collect();
        let mut f = Face::new(points, [v[0], v[1], v[2]]);
        if f.distance(&centroid) > 0.0 {
            v.swap(1, 2);
            f = Face::new(points, [v[0], v[1], v[2]]);
        }
        add_face(&mut faces, &mut edges, f);
    }

    let mut in_simplex = vec![false; points.len()];
    for &i in &simplex {
        in_simplex[i] = true;
    }
    for (i, p) in points.iter().enumerate() {
        if in_simplex[i] {
            continue;
        }
        assign(&mut faces, 0..4, i, p, eps);
    }

    // faces only gain points at creation, so a forward scan visits each once
    let mut cursor = 0;
    while cursor < faces.len() {
        if !faces[cursor].alive || faces[cursor].outside.is_empty() {
            cursor += 1;
            continue;
        }
        let seed_face = cursor;
        let eye = *faces[seed_face]
            .outside
            .iter()
            .max_by(|&&a, &&b| {
                faces[seed_face]
                    .distance(&points[a])
                    .total_cmp(&faces[seed_face].distance(&points[b]))
                    .then(b.cmp(&a))
            })
            .expect("nonempty outside set");
        let eye_p = points[eye];

        // visible region by flood fill from the seed face
        let mut visible = vec![seed_face];
        let mut is_visible: HashMap<usize, bool> = HashMap::from([(seed_face, true)]);
        let mut horizon: Vec<(usize, usize)> = Vec::new();
        let mut k = 0;
        while k < visible.len() {
            let fi = visible[k];
            k += 1;
            let v = faces[fi].v;
            for e in 0..3 {
                let (a, b) = (v[e], v[(e + 1) % 3]);
                let nb = *edges.get(&(b, a)).expect("closed hull has twin edges");
                match is_visible.get(&nb) {
                    Some(true) => {}
                    Some(false) => horizon.push((a, b)),
                    None => {
                        if faces[nb].distance(&eye_p) > eps {
                            is_visible.insert(nb, true);
                            visible.push(nb);
                        } else {
                            is_visible.insert(nb, false);
                            horizon.push((a, b));
                        }
                    }
                }
            }
        }

        let mut orphans = Vec::new();
        for &fi in &visible {
            let f = &mut faces[fi];
            f.alive = false;
            orphans.append(&mut f.outside);
            let v = f.v;
            for e in 0..3 {
                edges.remove(&(v[e], v[(e + 1) % 3]));
            }
        }
        let first_new = faces.len();
        for &(a, b) in &horizon {
            add_face(&mut faces, &mut edges, Face::new(points, [a, b, eye]));
        }
        let new_range = first_new..faces.len();
        for i in orphans {
            if i == eye {
                continue;
            }
            assign(&mut faces, new_range.clone(), i, &points[i], eps);
        }
    }

    Ok(collect(points, &faces))
}

fn add_face(faces: &mut Vec<Face>, edges: &mut HashMap<(usize, usize), usize>, f: Face) {
    let id = faces.len();
    for e in 0..3 {
        edges.insert((f.v[e], f.v[(e + 1) % 3]), id);
    }
    faces.push(f);
}

/// Puts point `i` in the outside set of the face in `range` it is farthest
/// above, if any is farther than `eps`.
fn assign(faces: &mut [Face], range: std::ops::Range<usize>, i: usize, p: &Point, eps: f64) {
    let mut best: Option<(usize, f64)> = None;
    for fi in range {
        let f = &faces[fi];
        if !f.alive {
            continue;
        }
        let d = f.distance(p);
        if d > eps && best.is_none_or(|(_, bd)| d > bd) {
            best = Some((fi, d));
        }
    }
    if let Some((fi, _)) = best {
        faces[fi].outside.push(i);
    }
}

fn initial_simplex(points: &[Point], eps: f64) -> Result<[usize; 4], GeometryError> {
    let mut extremes = Vec::with_capacity(6);
    for axis in 0..3 {
        let (mut lo, mut hi) = (0, 0);
        for (i, p) in points.iter().enumerate() {
            if p[axis] < points[lo][axis] {
                lo = i;
            }
            if p[axis] > points[hi][axis] {
                hi = i;
            }
        }
        extremes.push(lo);
        extremes.push(hi);
    }
    let (mut a, mut b, mut best) = (0, 0, -1.0);
    for &i in &extremes {
        for &j in &extremes {
            let d = (points[i] - points[j]).norm_squared();
            if d > best {
                best = d;
                a = i;
                b = j;
            }
        }
    }
    if best.sqrt() <= eps {
        return Err(GeometryError::DegenerateInput("all points coincide".into()));
    }
    let ab = (points[b] - points[a]).normalize();
    let line_dist = |p: &Point| (p - points[a]).cross(&ab).norm();
    let c = argmax(points, line_dist);
    if line_dist(&points[c]) <= eps {
        return Err(GeometryError::DegenerateInput("points are collinear".into()));
    }
    let n = (points[b] - points[a]).cross(&(points[c] - points[a])).normalize();
    let plane_dist = |p: &Point| n.dot(&(p - points[a])).abs();
    let d = argmax(points, plane_dist);
    if plane_dist(&points[d]) <= eps {
        return Err(GeometryError::DegenerateInput("points are coplanar".into()));
    }
    Ok([a, b, c, d])
}

fn argmax(points: &[Point], f: impl Fn(&Point) -> f64) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, p) in points.iter().enumerate() {
        let v = f(p);
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Compacts live faces; hull vertices keep their relative input order.
fn collect(points: &[Point], faces: &[Face]) -> ConvexPiece {
    let live: Vec<&Face> = faces.iter().filter(|f| f.alive).collect();
    let mut used: Vec<usize> = live.iter().flat_map(|f| f.v).collect();
    used.sort_unstable();
    used.dedup();
    let remap: HashMap<usize, u32> = used.iter().enumerate().map(|(k, &i)| (i, k as u32)).collect();
    ConvexPiece {
        hull_vertices: used.iter().map(|&i| points[i]).collect(),
        hull_faces: live.iter().map(|f| f.v.map(|i| remap[&i])).collect(),
        source_faces: Vec::new(),
    }
}
