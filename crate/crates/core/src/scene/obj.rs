//! Wavefront OBJ reading and writing (geometry only).
//!
//! Polygons with more than three corners are fan-triangulated in file
//! order, so face ids in annotations index the triangulated list.

use std::fmt::Write as _;

use super::mesh::TriMesh;
use super::MeshParseError;
use crate::geometry::Point;

pub fn parse_obj(text: &str) -> Result<TriMesh, MeshParseError> {
    let mut vertices: Vec<Point> = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let keyword = tokens.next().unwrap_or_default();
        match keyword {
            "v" => {
                let mut xyz = [0.0f64; 3];
                for c in xyz.iter_mut() {
                    let tok = tokens
                        .next()
                        .ok_or_else(|| MeshParseError::at(line_no, "vertex needs 3 coordinates"))?;
                    *c = tok.parse().map_err(|_| {
                        MeshParseError::at(line_no, format!("bad coordinate `{tok}`"))
                    })?;
                    if !c.is_finite() {
                        return Err(MeshParseError::at(line_no, "non-finite coordinate"));
                    }
                }
                vertices.push(Point::from(xyz));
            }
            "f" => {
                let mut corners = Vec::new();
                for tok in tokens {
                    let idx_str = tok.split('/').next().unwrap_or("");
                    let idx: i64 = idx_str.parse().map_err(|_| {
                        MeshParseError::at(line_no, format!("bad face index `{tok}`"))
                    })?;
                    let resolved = if idx > 0 {
                        idx - 1
                    } else if idx < 0 {
                        vertices.len() as i64 + idx
                    } else {
                        return Err(MeshParseError::at(line_no, "face index 0 is invalid"));
                    };
                    if resolved < 0 || resolved >= vertices.len() as i64 {
                        return Err(MeshParseError::at(
                            line_no,
                            format!("face index {idx} out of range ({} vertices so far)", vertices.len()),
                        ));
                    }
                    corners.push(resolved as u32);
                }
                if corners.len() < 3 {
                    return Err(MeshParseError::at(line_no, "face needs at least 3 corners"));
                }
                for k in 1..corners.len() - 1 {
                    let f = [corners[0], corners[k], corners[k + 1]];
                    if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                        return Err(MeshParseError::at(line_no, "degenerate face"));
                    }
                    faces.push(f);
                }
            }
            "vt" | "vn" | "vp" | "g" | "o" | "s" | "usemtl" | "mtllib" | "l" | "p" => {}
            other => {
                log::debug!("obj line {line_no}: ignoring `{other}`");
            }
        }
    }
    TriMesh::new(vertices, faces).map_err(|e| MeshParseError::new(e.to_string()))
}

/// Serializes vertices and faces; coordinates use the shortest decimal form
/// that reads back to the same `f64`.
pub fn write_obj(mesh: &TriMesh) -> String {
    let mut out = String::with_capacity(mesh.vertex_count() * 32 + mesh.face_count() * 16);
    for v in mesh.vertices() {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for f in mesh.faces() {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}
