use std::collections::HashMap;

use super::Point;
use crate::scene::TriMesh;

#[derive(Debug, Clone, PartialEq)]
pub struct Welded {
    pub mesh: TriMesh,
    /// Input vertices that were merged into an earlier representative.
    pub vertices_welded: usize,
    /// Faces dropped because welding collapsed two of their corners.
    pub degenerate_faces_dropped: usize,
}

/// Concatenates `meshes` and merges vertices closer than `weld_eps`.
///
/// Uses a uniform grid of cell size `weld_eps`; a vertex joins the
/// earliest-seen representative within `weld_eps` among the 27 surrounding
/// cells, keeping that representative's position. With `weld_eps == 0` only
/// bit-identical positions merge. Face owner tags are carried over when
/// every input has them.
pub fn merge_weld(meshes: &[TriMesh], weld_eps: f64) -> Welded {
    assert!(weld_eps >= 0.0, "weld_eps must be non-negative");
    let mut reps: Vec<Point> = Vec::new();
    let mut grid: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
    let mut exact: HashMap<[u64; 3], u32> = HashMap::new();
    let mut faces = Vec::new();
    let keep_owner = !meshes.is_empty() && meshes.iter().all(|m| m.face_owner().is_some());
    let mut owner = Vec::new();
    let mut welded = 0;
    let mut dropped = 0;

    let cell = |p: &Point| -> [i64; 3] {
        [0, 1, 2].map(|k| (p[k] / weld_eps).floor() as i64)
    };

    for m in meshes {
        let mut remap = Vec::with_capacity(m.vertex_count());
        for p in m.vertices() {
            let before = reps.len();
            let id = if weld_eps == 0.0 {
                let key = [0, 1, 2].map(|k| (p[k] + 0.0).to_bits());
                *exact.entry(key).or_insert_with(|| {
                    reps.push(*p);
                    (reps.len() - 1) as u32
                })
            } else {
                let c = cell(p);
                let mut found: Option<u32> = None;
                for dx in -1..=1 {
                    for dy in -1..=1 {
                        for dz in -1..=1 {
                            if let Some(ids) = grid.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                                for &r in ids {
                                    if (reps[r as usize] - p).norm() <= weld_eps
                                        && found.is_none_or(|f| r < f)
                                    {
                                        found = Some(r);
                                    }
                                }
                            }
                        }
                    }
                }
                match found {
                    Some(r) => r,
                    None => {
                        reps.push(*p);
                        let r = (reps.len() - 1) as u32;
                        grid.entry(c).or_default().push(r);
                        r
                    }
                }
            };
            if reps.len() == before {
                welded += 1;
            }
            remap.push(id);
        }
        for (fi, f) in m.faces().iter().enumerate() {
            let g = f.map(|v| remap[v as usize]);
            if g[0] == g[1] || g[1] == g[2] || g[0] == g[2] {
                dropped += 1;
                continue;
            }
            faces.push(g);
            if keep_owner {
                owner.push(m.face_owner().expect("checked")[fi]);
            }
        }
    }
    let mesh = TriMesh::from_parts_unchecked(reps, faces, keep_owner.then_some(owner));
    Welded {
        mesh,
        vertices_welded: welded,
        degenerate_faces_dropped: dropped,
    }
}
