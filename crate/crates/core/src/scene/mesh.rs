use std::collections::HashMap;

use thiserror::Error;

use crate::geometry::{Aabb, Point, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("face {face} references vertex {index}, but the mesh has {count} vertices")]
    IndexOutOfRange { face: usize, index: u32, count: usize },
    #[error("face {face} is degenerate (repeated vertex index)")]
    DegenerateFace { face: usize },
    #[error("vertex {vertex} has a non-finite coordinate")]
    NonFinite { vertex: usize },
    #[error("face owner list has {got} entries for {faces} faces")]
    OwnerLength { got: usize, faces: usize },
}

/// Indexed triangle mesh in meters, z-up.
///
/// Invariants (checked by [`TriMesh::new`]): every index is in range, no face
/// repeats a vertex, and all coordinates are finite. `face_owner`, when
/// present, tags each face with the index of the scene node that owns it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh {
    vertices: Vec<Point>,
    faces: Vec<[u32; 3]>,
    face_owner: Option<Vec<u32>>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Point>, faces: Vec<[u32; 3]>) -> Result<Self, MeshError> {
        for (i, v) in vertices.iter().enumerate() {
            if !v.iter().all(|c| c.is_finite()) {
                return Err(MeshError::NonFinite { vertex: i });
            }
        }
        let count = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            for &index in f {
                if index as usize >= count {
                    return Err(MeshError::IndexOutOfRange { face: fi, index, count });
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(MeshError::DegenerateFace { face: fi });
            }
        }
        Ok(Self {
            vertices,
            faces,
            face_owner: None,
        })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn with_face_owner(mut self, owner: Vec<u32>) -> Result<Self, MeshError> {
        if owner.len() != self.faces.len() {
            return Err(MeshError::OwnerLength {
                got: owner.len(),
                faces: self.faces.len(),
            });
        }
        self.face_owner = Some(owner);
        Ok(self)
    }

    pub fn without_face_owner(mut self) -> Self {
        self.face_owner = None;
        self
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn face_owner(&self) -> Option<&[u32]> {
        self.face_owner.as_deref()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn triangle(&self, face: usize) -> [Point; 3] {
        let [a, b, c] = self.faces[face];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Unnormalized face normal (length = twice the area).
    pub fn face_cross(&self, face: usize) -> Vec3 {
        let [a, b, c] = self.triangle(face);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, face: usize) -> f64 {
        0.5 * self.face_cross(face).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Box over all vertices, including ones no face uses.
    pub fn aabb(&self) -> Option<Aabb> {
        Aabb::from_points(&self.vertices)
    }

    /// Extracts the given faces into a compact mesh. Vertices are re-indexed
    /// in order of first use; the second return value maps local vertex
    /// indices back to this mesh's indices.
    pub fn submesh(&self, face_ids: &[u32]) -> (TriMesh, Vec<u32>) {
        let mut remap: HashMap<u32, u32> = HashMap::new();
        let mut back = Vec::new();
        let mut vertices = Vec::new();
        let mut faces = Vec::with_capacity(face_ids.len());
        for &fid in face_ids {
            let f = self.faces[fid as usize];
            let mut local = [0u32; 3];
            for (k, &v) in f.iter().enumerate() {
                local[k] = *remap.entry(v).or_insert_with(|| {
                    back.push(v);
                    vertices.push(self.vertices[v as usize]);
                    (vertices.len() - 1) as u32
                });
            }
            faces.push(local);
        }
        let face_owner = self
            .face_owner
            .as_ref()
            .map(|o| face_ids.iter().map(|&f| o[f as usize]).collect());
        (
            TriMesh {
                vertices,
                faces,
                face_owner,
            },
            back,
        )
    }

    /// Drops vertices no face references, preserving the order of the rest.
    pub fn compacted(&self) -> TriMesh {
        let all: Vec<u32> = (0..self.faces.len() as u32).collect();
        let mut used = vec![false; self.vertices.len()];
        for f in &self.faces {
            for &v in f {
                used[v as usize] = true;
            }
        }
        if used.iter().all(|&u| u) {
            return self.clone();
        }
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        for (i, v) in self.vertices.iter().enumerate() {
            if used[i] {
                remap[i] = vertices.len() as u32;
                vertices.push(*v);
            }
        }
        let faces = all
            .iter()
            .map(|&f| self.faces[f as usize].map(|v| remap[v as usize]))
            .collect();
        TriMesh {
            vertices,
            faces,
            face_owner: self.face_owner.clone(),
        }
    }

    /// Applies `p -> p * scale + offset` to every vertex.
    pub fn transformed(&self, scale: f64, offset: &Vec3) -> TriMesh {
        TriMesh {
            vertices: self
                .vertices
                .iter()
                .map(|p| Point::from(p.coords * scale + offset))
                .collect(),
            faces: self.faces.clone(),
            face_owner: self.face_owner.clone(),
        }
    }

    pub(crate) fn from_parts_unchecked(
        vertices: Vec<Point>,
        faces: Vec<[u32; 3]>,
        face_owner: Option<Vec<u32>>,
    ) -> Self {
        debug_assert!(face_owner.as_ref().is_none_or(|o| o.len() == faces.len()));
        Self {
            vertices,
            faces,
            face_owner,
        }
    }
}
