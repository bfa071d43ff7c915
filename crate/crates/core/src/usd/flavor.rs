use std::collections::HashSet;

use nalgebra::UnitQuaternion;
use rayon::prelude::*;

use super::{join_path, Attribute, Prim, UsdDocument, Value, ValueType};
use crate::geometry::{Point, Vec3};
use crate::scene::{AnnotatedScene, ArticulationSpec, JointType, NodeKind, TriMesh};

/// Name of the scope holding joint prims in the geometry-focused flavor.
pub const JOINTS_SCOPE: &str = "joints";

const AXIS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlavorKind {
    Descriptive,
    GeometryFocused,
}

impl FlavorKind {
    pub fn build(self, scene: &AnnotatedScene) -> UsdDocument {
        match self {
            FlavorKind::Descriptive => build_descriptive(scene),
            FlavorKind::GeometryFocused => build_geometry_focused(scene),
        }
    }
}

/// Prim name for every node, by node index. Node ids are made identifier
/// safe and unique scene-wide; the joints scope name is reserved.
pub fn prim_names(scene: &AnnotatedScene) -> Vec<String> {
    let mut used: HashSet<String> = HashSet::from([JOINTS_SCOPE.to_string()]);
    let mut out = Vec::with_capacity(scene.nodes().len());
    for n in scene.nodes() {
        let mut base: String = n
            .id
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
            .collect();
        if base.is_empty() || base.starts_with(|c: char| c.is_ascii_digit()) {
            base.insert(0, '_');
        }
        let mut name = base.clone();
        let mut k = 2;
        while used.contains(&name) {
            name = format!("{base}_{k}");
            k += 1;
        }
        used.insert(name.clone());
        out.push(name);
    }
    out
}

/// Geometry-free flavor: one Xform per node carrying its label and subtree
/// bounding box, parts nested under their object, articulation data as plain
/// attributes on the part.
pub fn build_descriptive(scene: &AnnotatedScene) -> UsdDocument {
    let names = prim_names(scene);
    let mut doc = UsdDocument::new();
    for (i, n) in scene.nodes().iter().enumerate() {
        if n.kind != NodeKind::Object {
            continue;
        }
        let mut prim = descriptive_prim(scene, i, &names[i]);
        for (j, c) in scene.nodes().iter().enumerate() {
            if c.parent.as_deref() == Some(n.id.as_str()) {
                prim.children.push(descriptive_prim(scene, j, &names[j]));
            }
        }
        doc.root.children.push(prim);
    }
    doc
}

fn descriptive_prim(scene: &AnnotatedScene, index: usize, name: &str) -> Prim {
    let n = &scene.nodes()[index];
    let mut p = Prim::new(name, Some("Xform")).with_attr("label", Attribute::string(&n.label).custom());
    if name != n.id {
        p = p.with_attr("instance_id", Attribute::string(&n.id).custom());
    }
    if let Ok(b) = scene.subtree_aabb(&n.id) {
        p = p
            .with_attr("bbox_min", Attribute::double3(b.min.coords.into()).custom())
            .with_attr("bbox_max", Attribute::double3(b.max.coords.into()).custom());
    }
    if let Some(a) = scene.articulation(&n.id) {
        p = p
            .with_attr("joint_type", Attribute::token(a.joint_type.as_str()).custom())
            .with_attr("axis", Attribute::double3(a.axis.into()).custom())
            .with_attr("pivot", Attribute::double3(a.pivot.coords.into()).custom())
            .with_attr("range", Attribute::new(ValueType::Double2, Value::Vec2(a.range)).custom());
    }
    p
}

/// Simulator flavor: every node is a top-level Mesh prim with its own
/// re-indexed sub-mesh; articulations become joint prims under `/joints`.
pub fn build_geometry_focused(scene: &AnnotatedScene) -> UsdDocument {
    let names = prim_names(scene);
    let meshes: Vec<TriMesh> = scene
        .nodes()
        .par_iter()
        .map(|n| scene.mesh().submesh(&n.faces).0)
        .collect();
    let mut doc = UsdDocument::new();
    for ((n, name), mesh) in scene.nodes().iter().zip(&names).zip(&meshes) {
        let prim = mesh_prim(name, mesh).with_attr("label", Attribute::string(&n.label).custom());
        doc.root.children.push(prim);
    }
    if !scene.articulations().is_empty() {
        let mut scope = Prim::new(JOINTS_SCOPE, Some("Scope"));
        for a in scene.articulations() {
            let part = scene.node_index(&a.part_id).expect("validated scene");
            let parent_id = scene.nodes()[part].parent.as_deref().expect("parts have parents");
            let parent = scene.node_index(parent_id).expect("validated scene");
            let joint = joint_prim(
                a,
                &format!("{}_joint", names[part]),
                &join_path("/", &names[parent]),
                &join_path("/", &names[part]),
            );
            scope.children.push(joint);
        }
        doc.root.children.push(scope);
    }
    doc
}

/// Mesh prim with `points`, `faceVertexCounts` and `faceVertexIndices`.
pub fn mesh_prim(name: &str, mesh: &TriMesh) -> Prim {
    let points = mesh.vertices().iter().map(|p| [p.x, p.y, p.z]).collect();
    let indices = mesh.faces().iter().flatten().map(|&v| v as i64).collect();
    Prim::new(name, Some("Mesh"))
        .with_attr("points", Attribute::new(ValueType::Point3fArray, Value::Vec3Array(points)))
        .with_attr(
            "faceVertexCounts",
            Attribute::new(ValueType::IntArray, Value::IntArray(vec![3; mesh.face_count()])),
        )
        .with_attr("faceVertexIndices", Attribute::new(ValueType::IntArray, Value::IntArray(indices)))
}

/// Reads back the triangle mesh of a prim written by [`mesh_prim`]. `None`
/// when the prim has no mesh data or it is not all triangles.
pub fn read_mesh(prim: &Prim) -> Option<TriMesh> {
    let Some(Value::Vec3Array(pts)) = prim.attr("points") else {
        return None;
    };
    let Some(Value::IntArray(counts)) = prim.attr("faceVertexCounts") else {
        return None;
    };
    let Some(Value::IntArray(idx)) = prim.attr("faceVertexIndices") else {
        return None;
    };
    if counts.iter().any(|&c| c != 3) || idx.len() != counts.len() * 3 {
        return None;
    }
    let vertices = pts.iter().map(|p| Point::new(p[0], p[1], p[2])).collect();
    let mut faces = Vec::with_capacity(counts.len());
    for f in idx.chunks(3) {
        let g: Vec<u32> = f.iter().map(|&v| u32::try_from(v).ok()).collect::<Option<_>>()?;
        faces.push([g[0], g[1], g[2]]);
    }
    TriMesh::new(vertices, faces).ok()
}

/// Joint prim for one articulation. Meshes are authored in world space, so
/// the pivot is the local anchor on both bodies. Axis-aligned axes map to the
/// `physics:axis` token (limits negated for a negative axis); any other axis
/// keeps `X` and rotates the joint frame onto it. Revolute limits are in
/// degrees.
pub fn joint_prim(a: &ArticulationSpec, name: &str, body0: &str, body1: &str) -> Prim {
    let type_name = match a.joint_type {
        JointType::Prismatic => "PhysicsPrismaticJoint",
        JointType::Revolute => "PhysicsRevoluteJoint",
    };
    let to_unit = |x: f64| match a.joint_type {
        JointType::Prismatic => x,
        JointType::Revolute => x.to_degrees(),
    };
    let (token, sign) = axis_token(&a.axis).unwrap_or(("X", 1.0));
    let (mut lo, mut hi) = (to_unit(a.range[0]), to_unit(a.range[1]));
    if sign < 0.0 {
        (lo, hi) = (-hi, -lo);
    }
    let pivot: [f64; 3] = a.pivot.coords.into();
    let mut p = Prim::new(name, Some(type_name))
        .with_rel("physics:body0", body0)
        .with_rel("physics:body1", body1)
        .with_attr("physics:axis", Attribute::token(token).uniform())
        .with_attr("physics:lowerLimit", Attribute::float(lo))
        .with_attr("physics:upperLimit", Attribute::float(hi))
        .with_attr("physics:localPos0", Attribute::float3(pivot))
        .with_attr("physics:localPos1", Attribute::float3(pivot));
    if axis_token(&a.axis).is_none() {
        let q = UnitQuaternion::rotation_between(&Vec3::x(), &a.axis).unwrap_or_else(UnitQuaternion::identity);
        let rot = Value::Vec4([q.w, q.i, q.j, q.k]);
        p = p
            .with_attr("physics:localRot0", Attribute::new(ValueType::Quatf, rot.clone()))
            .with_attr("physics:localRot1", Attribute::new(ValueType::Quatf, rot));
    }
    p
}

fn axis_token(axis: &Vec3) -> Option<(&'static str, f64)> {
    for (k, t) in ["X", "Y", "Z"].into_iter().enumerate() {
        for s in [1.0, -1.0] {
            let mut e = Vec3::zeros();
            e[k] = s;
            if (axis - e).norm() <= AXIS_TOL {
                return Some((t, s));
            }
        }
    }
    None
}
