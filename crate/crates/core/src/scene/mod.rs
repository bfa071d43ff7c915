//! Annotated scene scans: a single triangle mesh plus object/part instance
//! segmentation, region masks and articulation parameters.
//!
//! Scenes are z-up, in meters, right-handed. Annotations are read from a
//! versioned JSON document (see [`ANNOTATION_VERSION`]); face ids index the
//! mesh's face list in file order.

mod mesh;
mod obj;
mod ply;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Aabb, Point, Vec3};

pub use mesh::{MeshError, TriMesh};
pub use obj::{parse_obj, write_obj};
pub use ply::parse_ply;

pub const ANNOTATION_VERSION: &str = "1";

/// Tolerance on `|axis| = 1` for articulation axes.
pub const AXIS_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct MeshParseError {
    pub line: Option<usize>,
    pub message: String,
}

impl MeshParseError {
    pub(crate) fn new(message: impl Into<String>) -> Self {
        Self {
            line: None,
            message: message.into(),
        }
    }

    pub(crate) fn at(line: usize, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            message: message.into(),
        }
    }
}

impl fmt::Display for MeshParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("parse error in {path}: {detail}")]
    Parse { path: String, detail: MeshParseError },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("reference error: {0}")]
    Reference(String),
    #[error("invalid scene: {0}")]
    Invariant(String),
    #[error("unknown node id `{0}`")]
    UnknownId(String),
    #[error("node `{0}` owns no faces")]
    EmptyNode(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Object,
    Part,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Object => "object",
            NodeKind::Part => "part",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionKind {
    Fixed,
    Movable,
    Graspable,
}

impl RegionKind {
    pub const ALL: [RegionKind; 3] = [RegionKind::Fixed, RegionKind::Movable, RegionKind::Graspable];

    pub fn as_str(self) -> &'static str {
        match self {
            RegionKind::Fixed => "fixed",
            RegionKind::Movable => "movable",
            RegionKind::Graspable => "graspable",
        }
    }
}

/// One segmented instance. `faces` and every region are sorted, duplicate
/// free, and regions are subsets of `faces`.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceNode {
    pub id: String,
    pub label: String,
    pub kind: NodeKind,
    pub parent: Option<String>,
    pub faces: Vec<u32>,
    pub regions: BTreeMap<RegionKind, Vec<u32>>,
}

impl InstanceNode {
    pub fn region(&self, kind: RegionKind) -> &[u32] {
        self.regions.get(&kind).map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointType {
    Revolute,
    Prismatic,
}

impl JointType {
    pub fn as_str(self) -> &'static str {
        match self {
            JointType::Revolute => "revolute",
            JointType::Prismatic => "prismatic",
        }
    }
}

/// Joint of a part relative to its parent object. `range` is in radians for
/// revolute joints and meters for prismatic ones.
#[derive(Debug, Clone, PartialEq)]
pub struct ArticulationSpec {
    pub part_id: String,
    pub joint_type: JointType,
    pub axis: Vec3,
    pub pivot: Point,
    pub range: [f64; 2],
}

/// A validated scene. Construct with [`AnnotatedScene::new`] or
/// [`load_scene`]; immutable afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedScene {
    mesh: TriMesh,
    nodes: Vec<InstanceNode>,
    articulations: Vec<ArticulationSpec>,
    index: HashMap<String, usize>,
}

impl AnnotatedScene {
    /// Validates every scene invariant and tags the mesh faces with their
    /// owning node index.
    pub fn new(
        mesh: TriMesh,
        mut nodes: Vec<InstanceNode>,
        articulations: Vec<ArticulationSpec>,
    ) -> Result<Self, SceneError> {
        let face_count = mesh.face_count();
        let mut index = HashMap::new();
        for (i, n) in nodes.iter_mut().enumerate() {
            if n.id.is_empty() {
                return Err(SceneError::Invariant(format!("node #{i} has an empty id")));
            }
            if index.insert(n.id.clone(), i).is_some() {
                return Err(SceneError::Invariant(format!("duplicate node id `{}`", n.id)));
            }
            n.faces.sort_unstable();
            n.faces.dedup();
            for r in n.regions.values_mut() {
                r.sort_unstable();
                r.dedup();
            }
            n.regions.retain(|_, r| !r.is_empty());
        }

        let mut owner = vec![u32::MAX; face_count];
        for (i, n) in nodes.iter().enumerate() {
            match (n.kind, &n.parent) {
                (NodeKind::Object, None) => {}
                (NodeKind::Object, Some(p)) => {
                    return Err(SceneError::Invariant(format!(
                        "object `{}` has parent `{p}`; only parts may have parents",
                        n.id
                    )))
                }
                (NodeKind::Part, None) => {
                    return Err(SceneError::Invariant(format!("part `{}` has no parent", n.id)))
                }
                (NodeKind::Part, Some(p)) => match index.get(p) {
                    None => {
                        return Err(SceneError::Reference(format!(
                            "part `{}` cites missing parent `{p}`",
                            n.id
                        )))
                    }
                    Some(&pi) if nodes[pi].kind != NodeKind::Object => {
                        return Err(SceneError::Invariant(format!(
                            "parent `{p}` of part `{}` is not an object",
                            n.id
                        )))
                    }
                    Some(_) => {}
                },
            }
            for &f in &n.faces {
                let slot = owner.get_mut(f as usize).ok_or_else(|| {
                    SceneError::Reference(format!(
                        "node `{}` cites face {f}, mesh has {face_count} faces",
                        n.id
                    ))
                })?;
                if *slot != u32::MAX {
                    return Err(SceneError::Invariant(format!(
                        "face {f} is claimed by both `{}` and `{}`",
                        nodes[*slot as usize].id, n.id
                    )));
                }
                *slot = i as u32;
            }
            for (kind, region) in &n.regions {
                for f in region {
                    if n.faces.binary_search(f).is_err() {
                        return Err(SceneError::Reference(format!(
                            "{} region of `{}` cites face {f} outside the node",
                            kind.as_str(),
                            n.id
                        )));
                    }
                }
            }
        }

        let mut seen_parts = BTreeSet::new();
        for a in &articulations {
            match index.get(&a.part_id) {
                None => {
                    return Err(SceneError::Reference(format!(
                        "articulation cites missing part `{}`",
                        a.part_id
                    )))
                }
                Some(&i) if nodes[i].kind != NodeKind::Part => {
                    return Err(SceneError::Invariant(format!(
                        "articulation target `{}` is not a part",
                        a.part_id
                    )))
                }
                Some(_) => {}
            }
            if !seen_parts.insert(a.part_id.as_str()) {
                return Err(SceneError::Invariant(format!(
                    "part `{}` has more than one articulation",
                    a.part_id
                )));
            }
            let finite = a.axis.iter().chain(a.pivot.iter()).chain(a.range.iter()).all(|c| c.is_finite());
            if !finite {
                return Err(SceneError::Invariant(format!(
                    "articulation of `{}` has non-finite values",
                    a.part_id
                )));
            }
            if (a.axis.norm() - 1.0).abs() > AXIS_NORM_TOLERANCE {
                return Err(SceneError::Invariant(format!(
                    "articulation axis of `{}` is not unit length (|axis| = {})",
                    a.part_id,
                    a.axis.norm()
                )));
            }
            if a.range[0] > a.range[1] {
                return Err(SceneError::Invariant(format!(
                    "articulation range of `{}` has lo > hi",
                    a.part_id
                )));
            }
        }

        let mesh = mesh
            .with_face_owner(owner)
            .expect("owner vector sized to face count");
        Ok(Self {
            mesh,
            nodes,
            articulations,
            index,
        })
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn nodes(&self) -> &[InstanceNode] {
        &self.nodes
    }

    pub fn articulations(&self) -> &[ArticulationSpec] {
        &self.articulations
    }

    pub fn node(&self, id: &str) -> Option<&InstanceNode> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn require(&self, id: &str) -> Result<&InstanceNode, SceneError> {
        self.node(id).ok_or_else(|| SceneError::UnknownId(id.to_string()))
    }

    pub fn children<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a InstanceNode> + 'a {
        self.nodes
            .iter()
            .filter(move |n| n.parent.as_deref() == Some(id))
    }

    pub fn articulation(&self, part_id: &str) -> Option<&ArticulationSpec> {
        self.articulations.iter().find(|a| a.part_id == part_id)
    }

    /// Owner of a face: the node id, if any node claims it.
    pub fn face_owner(&self, face: u32) -> Option<&str> {
        let o = self.mesh.face_owner()?.get(face as usize).copied()?;
        (o != u32::MAX).then(|| self.nodes[o as usize].id.as_str())
    }

    /// Faces of the node plus all of its parts, sorted.
    pub fn subtree_faces(&self, id: &str) -> Result<Vec<u32>, SceneError> {
        let node = self.require(id)?;
        let mut faces = node.faces.clone();
        for c in self.children(id) {
            faces.extend_from_slice(&c.faces);
        }
        faces.sort_unstable();
        Ok(faces)
    }

    /// Distinct mesh vertex indices used by the given faces, sorted.
    pub fn face_vertex_indices(&self, faces: &[u32]) -> Vec<u32> {
        let set: BTreeSet<u32> = faces
            .iter()
            .flat_map(|&f| self.mesh.faces()[f as usize])
            .collect();
        set.into_iter().collect()
    }

    pub fn face_points(&self, faces: &[u32]) -> Vec<Point> {
        self.face_vertex_indices(faces)
            .into_iter()
            .map(|v| self.mesh.vertices()[v as usize])
            .collect()
    }

    /// Tight box over the vertices of the node's own faces.
    pub fn node_aabb(&self, id: &str) -> Result<Aabb, SceneError> {
        let node = self.require(id)?;
        self.faces_aabb(&node.faces)
            .ok_or_else(|| SceneError::EmptyNode(id.to_string()))
    }

    /// Box over the node and all of its parts.
    pub fn subtree_aabb(&self, id: &str) -> Result<Aabb, SceneError> {
        let faces = self.subtree_faces(id)?;
        self.faces_aabb(&faces)
            .ok_or_else(|| SceneError::EmptyNode(id.to_string()))
    }

    fn faces_aabb(&self, faces: &[u32]) -> Option<Aabb> {
        let verts = self.mesh.vertices();
        let mut points = faces
            .iter()
            .flat_map(|&f| self.mesh.faces()[f as usize])
            .map(|v| &verts[v as usize]);
        let first = *points.next()?;
        let mut b = Aabb { min: first, max: first };
        for p in points {
            b.min = b.min.inf(p);
            b.max = b.max.sup(p);
        }
        Some(b)
    }

    /// Compact sub-mesh of the node's own faces (local vertex indices).
    pub fn node_submesh(&self, id: &str) -> Result<TriMesh, SceneError> {
        let node = self.require(id)?;
        Ok(self.mesh.submesh(&node.faces).0)
    }

    /// Centroid of all vertices used by any node; falls back to the mesh box.
    pub fn centroid(&self) -> Point {
        let verts = self.mesh.vertices();
        if verts.is_empty() {
            return Point::origin();
        }
        let sum: Vec3 = verts.iter().map(|p| p.coords).sum();
        Point::from(sum / verts.len() as f64)
    }
}

// --------------------------------------------------------------------------
// Annotation interchange (schema v1)

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationFile {
    version: String,
    nodes: Vec<NodeRecord>,
    #[serde(default)]
    articulations: Vec<ArticulationRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    id: String,
    label: String,
    kind: NodeKind,
    #[serde(default)]
    parent: Option<String>,
    faces: Vec<u32>,
    #[serde(default)]
    regions: BTreeMap<RegionKind, Vec<u32>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArticulationRecord {
    part_id: String,
    joint_type: JointType,
    axis: [f64; 3],
    pivot: [f64; 3],
    range: [f64; 2],
}

#[derive(Debug, Deserialize)]
struct VersionProbe {
    version: Option<serde_json::Value>,
}

/// Parses annotation JSON and binds it to `mesh`.
pub fn parse_annotations(text: &str, mesh: TriMesh) -> Result<AnnotatedScene, SceneError> {
    let probe: VersionProbe = serde_json::from_str(text).map_err(|e| SceneError::Parse {
        path: "<annotations>".into(),
        detail: MeshParseError::at(e.line(), e.to_string()),
    })?;
    match probe.version {
        Some(serde_json::Value::String(v)) if v == ANNOTATION_VERSION => {}
        Some(v) => {
            return Err(SceneError::Schema(format!(
                "unsupported annotation version {v}, expected \"{ANNOTATION_VERSION}\""
            )))
        }
        None => return Err(SceneError::Schema("missing `version`".into())),
    }
    let file: AnnotationFile =
        serde_json::from_str(text).map_err(|e| SceneError::Schema(e.to_string()))?;
    let nodes = file
        .nodes
        .into_iter()
        .map(|n| InstanceNode {
            id: n.id,
            label: n.label,
            kind: n.kind,
            parent: n.parent,
            faces: n.faces,
            regions: n.regions,
        })
        .collect();
    let articulations = file
        .articulations
        .into_iter()
        .map(|a| ArticulationSpec {
            part_id: a.part_id,
            joint_type: a.joint_type,
            axis: Vec3::from(a.axis),
            pivot: Point::from(a.pivot),
            range: a.range,
        })
        .collect();
    AnnotatedScene::new(mesh, nodes, articulations)
}

/// Canonical annotation JSON: nodes and articulations in scene order, face
/// lists sorted, regions keyed in fixed order, two-space indentation.
pub fn annotations_to_json(scene: &AnnotatedScene) -> String {
    let file = AnnotationFile {
        version: ANNOTATION_VERSION.to_string(),
        nodes: scene
            .nodes
            .iter()
            .map(|n| NodeRecord {
                id: n.id.clone(),
                label: n.label.clone(),
                kind: n.kind,
                parent: n.parent.clone(),
                faces: n.faces.clone(),
                regions: n.regions.clone(),
            })
            .collect(),
        articulations: scene
            .articulations
            .iter()
            .map(|a| ArticulationRecord {
                part_id: a.part_id.clone(),
                joint_type: a.joint_type,
                axis: a.axis.into(),
                pivot: a.pivot.into(),
                range: a.range,
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("annotation records serialize");
    s.push('\n');
    s
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, SceneError> {
    std::fs::read(path).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads an OBJ or PLY mesh, chosen by file extension.
pub fn load_mesh(path: &Path) -> Result<TriMesh, SceneError> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let wrap = |detail| SceneError::Parse {
        path: path.display().to_string(),
        detail,
    };
    match ext.as_str() {
        "obj" => {
            let bytes = read_bytes(path)?;
            let text = String::from_utf8(bytes)
                .map_err(|_| wrap(MeshParseError::new("OBJ file is not valid UTF-8")))?;
            parse_obj(&text).map_err(wrap)
        }
        "ply" => parse_ply(&read_bytes(path)?).map_err(wrap),
        other => Err(wrap(MeshParseError::new(format!(
            "unsupported mesh format `.{other}` (expected .obj or .ply)"
        )))),
    }
}

pub fn load_scene(mesh_path: &Path, annotation_path: &Path) -> Result<AnnotatedScene, SceneError> {
    let mesh = load_mesh(mesh_path)?;
    let text = String::from_utf8(read_bytes(annotation_path)?).map_err(|_| SceneError::Parse {
        path: annotation_path.display().to_string(),
        detail: MeshParseError::new("annotation file is not valid UTF-8"),
    })?;
    parse_annotations(&text, mesh).map_err(|e| match e {
        SceneError::Parse { detail, .. } => SceneError::Parse {
            path: annotation_path.display().to_string(),
            detail,
        },
        other => other,
    })
}

/// Writes the scene as OBJ + canonical annotation JSON.
pub fn save_scene(scene: &AnnotatedScene, mesh_path: &Path, annotation_path: &Path) -> Result<(), SceneError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| SceneError::Io { path, source }
    };
    std::fs::write(mesh_path, write_obj(scene.mesh())).map_err(io(mesh_path))?;
    std::fs::write(annotation_path, annotations_to_json(scene)).map_err(io(annotation_path))?;
    Ok(())
}
