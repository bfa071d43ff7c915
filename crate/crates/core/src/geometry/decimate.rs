//! Quadric-error-metric edge-collapse decimation (Garland–Heckbert).
//!
//! Vertex quadrics sum the planes of incident faces; boundary edges add a
//! perpendicular constraint plane weighted by [`BOUNDARY_WEIGHT`] so open
//! scan borders stay put. Candidates pop from a min-heap ordered by
//! `(cost, v0, v1)`; stale entries are skipped by per-vertex version stamps.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use nalgebra::{Matrix3, Vector3};

use super::{Point, Vec3};
use crate::scene::TriMesh;

pub const BOUNDARY_WEIGHT: f64 = 1000.0;

/// Meshes at or below this face count are returned unchanged (flagged) when
/// a reduction is requested: a closed box has 12 triangles and cannot be
/// meaningfully simplified further.
pub const MIN_DECIMATABLE_FACES: usize = 12;

/// Floor on the output face count (a tetrahedron).
const MIN_OUTPUT_FACES: usize = 4;

/// det threshold below which the optimal-position system counts as singular.
const SINGULAR_DET: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Decimated {
    pub mesh: TriMesh,
    /// Input too small to decimate; `mesh` is the unchanged input.
    pub too_small: bool,
    /// Face budget `max(ceil(keep_ratio * faces), 4)`.
    pub target_faces: usize,
    /// False when valid collapses ran out before the budget was met.
    pub reached_target: bool,
}

#[derive(Debug, Clone, Copy, Default)]
struct Quadric([f64; 10]);

impl Quadric {
    fn plane(n: &Vec3, d: f64) -> Self {
        let (a, b, c) = (n.x, n.y, n.z);
        Quadric([a * a, a * b, a * c, a * d, b * b, b * c, b * d, c * c, c * d, d * d])
    }

    fn scaled(mut self, w: f64) -> Self {
        self.0.iter_mut().for_each(|x| *x *= w);
        self
    }

    fn add(&mut self, o: &Quadric) {
        for (x, y) in self.0.iter_mut().zip(o.0.iter()) {
            *x += y;
        }
    }

    fn sum(a: &Quadric, b: &Quadric) -> Quadric {
        let mut q = *a;
        q.add(b);
        q
    }

    fn error(&self, p: &Point) -> f64 {
        let q = &self.0;
        let (x, y, z) = (p.x, p.y, p.z);
        q[0] * x * x + 2.0 * q[1] * x * y + 2.0 * q[2] * x * z + 2.0 * q[3] * x
            + q[4] * y * y + 2.0 * q[5] * y * z + 2.0 * q[6] * y
            + q[7] * z * z + 2.0 * q[8] * z
            + q[9]
    }

    /// Minimizer of the quadric, if the 3x3 block is well conditioned.
    fn optimum(&self) -> Option<Point> {
        let q = &self.0;
        let a = Matrix3::new(q[0], q[1], q[2], q[1], q[4], q[5], q[2], q[5], q[7]);
        if a.determinant().abs() < SINGULAR_DET {
            return None;
        }
        let b = Vector3::new(-q[3], -q[6], -q[8]);
        let x = a.lu().solve(&b)?;
        x.iter().all(|c| c.is_finite()).then(|| Point::from(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    cost: f64,
    v0: u32,
    v1: u32,
    stamp0: u32,
    stamp1: u32,
    target: Point,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    // reversed: BinaryHeap is a max-heap, we want the cheapest first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.v0.cmp(&self.v0))
            .then_with(|| other.v1.cmp(&self.v1))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct State {
    pos: Vec<Point>,
    quadric: Vec<Quadric>,
    stamp: Vec<u32>,
    alive_vertex: Vec<bool>,
    faces: Vec<[u32; 3]>,
    alive_face: Vec<bool>,
    vertex_faces: Vec<Vec<u32>>,
    boundary_vertex: Vec<bool>,
    live_faces: usize,
}

impl State {
    fn new(mesh: &TriMesh) -> Self {
        let nv = mesh.vertex_count();
        let faces = mesh.faces().to_vec();
        let pos = mesh.vertices().to_vec();
        let mut quadric = vec![Quadric::default(); nv];
        let mut vertex_faces = vec![Vec::new(); nv];
        let mut edge_faces: HashMap<(u32, u32), Vec<u32>> = HashMap::new();
        for (fi, f) in faces.iter().enumerate() {
            let n = mesh.face_cross(fi);
            let len = n.norm();
            if len > 0.0 {
                let n = n / len;
                let q = Quadric::plane(&n, -n.dot(&pos[f[0] as usize].coords));
                for &v in f {
                    quadric[v as usize].add(&q);
                }
            }
            for &v in f {
                vertex_faces[v as usize].push(fi as u32);
            }
            for e in 0..3 {
                let (a, b) = (f[e], f[(e + 1) % 3]);
                edge_faces.entry((a.min(b), a.max(b))).or_default().push(fi as u32);
            }
        }
        let mut boundary_vertex = vec![false; nv];
        let mut boundary: Vec<_> = edge_faces.iter().filter(|(_, fs)| fs.len() == 1).collect();
        boundary.sort_by_key(|(e, _)| **e);
        for (&(a, b), fs) in boundary {
            boundary_vertex[a as usize] = true;
            boundary_vertex[b as usize] = true;
            let fnorm = mesh.face_cross(fs[0] as usize);
            let edge = pos[b as usize] - pos[a as usize];
            let m = edge.cross(&fnorm);
            let len = m.norm();
            if len > 0.0 {
                let m = m / len;
                let q = Quadric::plane(&m, -m.dot(&pos[a as usize].coords)).scaled(BOUNDARY_WEIGHT);
                quadric[a as usize].add(&q);
                quadric[b as usize].add(&q);
            }
        }
        let live_faces = faces.len();
        State {
            pos,
            quadric,
            stamp: vec![0; nv],
            alive_vertex: vec![true; nv],
            alive_face: vec![true; faces.len()],
            faces,
            vertex_faces,
            boundary_vertex,
            live_faces,
        }
    }

    fn live_faces_of(&self, v: u32) -> impl Iterator<Item = u32> + '_ {
        self.vertex_faces[v as usize]
            .iter()
            .copied()
            .filter(|&f| self.alive_face[f as usize])
    }

    fn neighbors(&self, v: u32) -> BTreeSet<u32> {
        self.live_faces_of(v)
            .flat_map(|f| self.faces[f as usize])
            .filter(|&u| u != v)
            .collect()
    }

    fn candidate(&self, a: u32, b: u32) -> Candidate {
        let (v0, v1) = (a.min(b), a.max(b));
        let q = Quadric::sum(&self.quadric[v0 as usize], &self.quadric[v1 as usize]);
        let p0 = self.pos[v0 as usize];
        let p1 = self.pos[v1 as usize];
        let mid = nalgebra::center(&p0, &p1);
        let edge_len = (p1 - p0).norm();
        let target = match q.optimum() {
            // reject solutions that fly away from the edge on near-singular systems
            Some(p) if (p - mid).norm() <= 2.0 * edge_len.max(f64::MIN_POSITIVE) => p,
            _ => [mid, p0, p1]
                .into_iter()
                .min_by(|x, y| q.error(x).total_cmp(&q.error(y)))
                .expect("three options"),
        };
        Candidate {
            cost: q.error(&target).max(0.0),
            v0,
            v1,
            stamp0: self.stamp[v0 as usize],
            stamp1: self.stamp[v1 as usize],
            target,
        }
    }

    fn is_current(&self, c: &Candidate) -> bool {
        self.alive_vertex[c.v0 as usize]
            && self.alive_vertex[c.v1 as usize]
            && self.stamp[c.v0 as usize] == c.stamp0
            && self.stamp[c.v1 as usize] == c.stamp1
    }

    /// Topology and geometry checks: link condition, no pinching of two
    /// boundary loops, and no face normal flip around either endpoint.
    fn collapse_ok(&self, c: &Candidate) -> bool {
        let shared: Vec<u32> = self
            .live_faces_of(c.v0)
            .filter(|&f| self.faces[f as usize].contains(&c.v1))
            .collect();
        if shared.is_empty() {
            return false;
        }
        let common = self.neighbors(c.v0).intersection(&self.neighbors(c.v1)).count();
        if common != shared.len() {
            return false;
        }
        let boundary_edge = shared.len() == 1;
        if !boundary_edge && self.boundary_vertex[c.v0 as usize] && self.boundary_vertex[c.v1 as usize] {
            return false;
        }
        if self.live_faces - shared.len() < MIN_OUTPUT_FACES {
            return false;
        }
        for v in [c.v0, c.v1] {
            for f in self.live_faces_of(v) {
                let face = self.faces[f as usize];
                if face.contains(&c.v0) && face.contains(&c.v1) {
                    continue;
                }
                let corners = face.map(|u| self.pos[u as usize]);
                let before = (corners[1] - corners[0]).cross(&(corners[2] - corners[0]));
                let moved = face.map(|u| if u == v { c.target } else { self.pos[u as usize] });
                let after = (moved[1] - moved[0]).cross(&(moved[2] - moved[0]));
                let (lb, la) = (before.norm(), after.norm());
                if la <= 1e-14 * (1.0 + lb) {
                    return false;
                }
                if lb > 0.0 && before.dot(&after) <= 0.0 {
                    return false;
                }
            }
        }
        true
    }

    fn collapse(&mut self, c: &Candidate) {
        let (keep, gone) = (c.v0, c.v1);
        self.pos[keep as usize] = c.target;
        let q = self.quadric[gone as usize];
        self.quadric[keep as usize].add(&q);
        self.boundary_vertex[keep as usize] |= self.boundary_vertex[gone as usize];
        self.alive_vertex[gone as usize] = false;
        self.stamp[keep as usize] += 1;
        let moved: Vec<u32> = self.vertex_faces[gone as usize].clone();
        for f in moved {
            if !self.alive_face[f as usize] {
                continue;
            }
            let face = &mut self.faces[f as usize];
            if face.contains(&keep) {
                self.alive_face[f as usize] = false;
                self.live_faces -= 1;
            } else {
                for u in face.iter_mut() {
                    if *u == gone {
                        *u = keep;
                    }
                }
                self.vertex_faces[keep as usize].push(f);
            }
        }
        self.vertex_faces[gone as usize].clear();
        let mut list = std::mem::take(&mut self.vertex_faces[keep as usize]);
        list.retain(|&f| self.alive_face[f as usize]);
        list.sort_unstable();
        list.dedup();
        self.vertex_faces[keep as usize] = list;
    }
}

/// Simplifies `mesh` to at most `max(ceil(keep_ratio * faces), 4)` faces.
///
/// `keep_ratio = 1.0` returns the input unchanged. Inputs with at most
/// [`MIN_DECIMATABLE_FACES`] faces are returned unchanged with
/// `too_small` set. Surviving faces keep their relative order and owner
/// tags; unused vertices are dropped.
pub fn decimate_quadric(mesh: &TriMesh, keep_ratio: f64) -> Decimated {
    assert!(
        keep_ratio > 0.0 && keep_ratio <= 1.0,
        "keep_ratio must be in (0, 1], got {keep_ratio}"
    );
    let n = mesh.face_count();
    let target = ((keep_ratio * n as f64).ceil() as usize).max(MIN_OUTPUT_FACES);
    if keep_ratio >= 1.0 {
        return Decimated {
            mesh: mesh.clone(),
            too_small: false,
            target_faces: n,
            reached_target: true,
        };
    }
    if n <= MIN_DECIMATABLE_FACES {
        log::warn!("mesh with {n} faces is too small to decimate; returned unchanged");
        return Decimated {
            mesh: mesh.clone(),
            too_small: true,
            target_faces: target,
            reached_target: n <= target,
        };
    }

    let mut st = State::new(mesh);
    let mut heap = BinaryHeap::new();
    let mut seen = BTreeSet::new();
    for f in &st.faces {
        for e in 0..3 {
            let (a, b) = (f[e], f[(e + 1) % 3]);
            if seen.insert((a.min(b), a.max(b))) {
                heap.push(st.candidate(a, b));
            }
        }
    }

    while st.live_faces > target {
        let Some(c) = heap.pop() else { break };
        if !st.is_current(&c) || !st.collapse_ok(&c) {
            continue;
        }
        st.collapse(&c);
        for u in st.neighbors(c.v0) {
            heap.push(st.candidate(c.v0, u));
        }
    }

    let mut faces = Vec::with_capacity(st.live_faces);
    let mut owner = mesh.face_owner().map(|_| Vec::with_capacity(st.live_faces));
    for (fi, f) in st.faces.iter().enumerate() {
        if st.alive_face[fi] {
            faces.push(*f);
            if let (Some(o), Some(src)) = (owner.as_mut(), mesh.face_owner()) {
                o.push(src[fi]);
            }
        }
    }
    let reached_target = faces.len() <= target;
    if !reached_target {
        log::warn!("decimation stopped at {} faces, budget {target}", faces.len());
    }
    let out = TriMesh::from_parts_unchecked(st.pos, faces, owner).compacted();
    Decimated {
        mesh: out,
        too_small: false,
        target_faces: target,
        reached_target,
    }
}
