//! Simulation prep: decimation by object class, static merging, ground
//! fixing, surface snapping, collision pieces and the task configuration.

mod bundle;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Config;
use crate::geometry::{ransac_plane, DecompositionParams, GeometryError, Point, RansacParams, SurfaceConstraint, Vec3};
use crate::scene::{AnnotatedScene, InstanceNode, RegionKind};
use crate::usd::{join_path, Prim, UsdDocument, JOINTS_SCOPE};

pub use bundle::{
    build_sim_bundle, JointConfig, MergedReport, ObjectReport, SimBundle, SimReport, SimTaskConfig, SnapReport,
    STATIC_MERGED,
};

/// Clearance left between a snapped object and its support.
pub const SNAP_CLEARANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("no node `{0}`")]
    UnknownId(String),
    #[error("`{0}` has no articulation")]
    NoArticulation(String),
    #[error("`{0}` has no graspable region")]
    NoGraspRegion(String),
    #[error("no prim at {0}")]
    UnknownPath(String),
    #[error("prim {0} already exists")]
    PrimExists(String),
    #[error("{0} carries no mesh")]
    NoMesh(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeClass {
    Structural,
    StaticObj,
    Manipulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecimationPolicy {
    pub structural_ratio: f64,
    pub static_ratio: f64,
    pub structural_labels: BTreeSet<String>,
}

impl Default for DecimationPolicy {
    fn default() -> Self {
        Self::from_config(&Config::default())
    }
}

impl DecimationPolicy {
    pub fn from_config(c: &Config) -> Self {
        Self {
            structural_ratio: c.simprep.structural_ratio,
            static_ratio: c.simprep.static_ratio,
            structural_labels: c.simprep.structural_labels.iter().map(|l| l.trim().to_lowercase()).collect(),
        }
    }

    /// Keep ratio for a class; `None` means full resolution.
    pub fn ratio(&self, class: NodeClass) -> Option<f64> {
        match class {
            NodeClass::Structural => Some(self.structural_ratio),
            NodeClass::StaticObj => Some(self.static_ratio),
            NodeClass::Manipulated => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub policy: DecimationPolicy,
    pub decomposition: DecompositionParams,
    pub weld_eps: f64,
    pub ransac: RansacParams,
}

impl Default for SimParams {
    fn default() -> Self {
        Self::from_config(&Config::default())
    }
}

impl SimParams {
    pub fn from_config(c: &Config) -> Self {
        Self {
            policy: DecimationPolicy::from_config(c),
            decomposition: DecompositionParams {
                concavity_thresh: c.simprep.concavity_thresh,
                max_pieces: c.simprep.max_pieces,
                max_depth: c.simprep.max_depth,
            },
            weld_eps: c.simprep.weld_eps,
            ransac: RansacParams {
                dist_thresh: c.ransac.dist_thresh,
                iters: c.ransac.iters,
                seed: c.seed,
            },
        }
    }
}

/// Manipulated wins over everything; otherwise the label decides.
pub fn classify_structural(
    node: &InstanceNode,
    structural_labels: &BTreeSet<String>,
    manipulated: &BTreeSet<String>,
) -> NodeClass {
    if manipulated.contains(&node.id) {
        NodeClass::Manipulated
    } else if structural_labels.contains(&node.label.trim().to_lowercase()) {
        NodeClass::Structural
    } else {
        NodeClass::StaticObj
    }
}

/// Mean of the distinct vertices of the part's graspable faces.
pub fn compute_grasp_point(scene: &AnnotatedScene, part_id: &str) -> Result<Point, SimError> {
    let node = scene.node(part_id).ok_or_else(|| SimError::UnknownId(part_id.to_string()))?;
    let region = node.region(RegionKind::Graspable);
    if region.is_empty() {
        return Err(SimError::NoGraspRegion(part_id.to_string()));
    }
    let pts = scene.face_points(region);
    let sum: Vec3 = pts.iter().map(|p| p.coords).sum();
    Ok(Point::from(sum / pts.len() as f64))
}

/// Anchors `prim_path` to the world with a fixed joint
/// `/joints/<name>_fixed` whose `physics:body0` is left without a target.
pub fn fix_to_ground(doc: &UsdDocument, prim_path: &str) -> Result<UsdDocument, SimError> {
    let prim = doc
        .prim_at(prim_path)
        .filter(|_| prim_path != "/")
        .ok_or_else(|| SimError::UnknownPath(prim_path.to_string()))?;
    let has_mesh = |p: &Prim| p.attr("points").is_some();
    if !has_mesh(prim) && !prim.children.iter().any(has_mesh) {
        return Err(SimError::NoMesh(prim_path.to_string()));
    }
    let name = format!("{}_fixed", prim.name);
    let path = join_path(&join_path("/", JOINTS_SCOPE), &name);
    if doc.prim_at(&path).is_some() {
        return Err(SimError::PrimExists(path));
    }
    let mut out = doc.clone();
    if out.prim_at(&join_path("/", JOINTS_SCOPE)).is_none() {
        out.root.children.push(Prim::new(JOINTS_SCOPE, Some("Scope")));
    }
    let mut joint = Prim::new(name, Some("PhysicsFixedJoint")).with_rel("physics:body1", prim_path);
    joint.relationships.insert("physics:body0".into(), None);
    out.root
        .child_mut(JOINTS_SCOPE)
        .expect("scope exists")
        .children
        .push(joint);
    Ok(out)
}

/// Translation that drops (or lifts) the object so its box bottom sits
/// [`SNAP_CLEARANCE`] above the support's dominant horizontal plane,
/// measured under the object's box center. x and y are unchanged.
pub fn snap_to_surface(
    scene: &AnnotatedScene,
    object_id: &str,
    support_id: &str,
    ransac: &RansacParams,
) -> Result<Vec3, SimError> {
    let object = scene
        .subtree_aabb(object_id)
        .map_err(|_| SimError::UnknownId(object_id.to_string()))?;
    let faces = scene
        .subtree_faces(support_id)
        .map_err(|_| SimError::UnknownId(support_id.to_string()))?;
    let plane = ransac_plane(&scene.face_points(&faces), ransac, SurfaceConstraint::Horizontal)?;
    let c = object.center();
    let height = plane.height_at(c.x, c.y).expect("horizontal plane");
    Ok(Vec3::new(0.0, 0.0, height + SNAP_CLEARANCE - object.min.z))
}

/// The node right below `object_id`: overlapping footprint, top at or under
/// the object's bottom (1 mm slack), highest top wins, ties by node order.
pub fn find_support(scene: &AnnotatedScene, object_id: &str, exclude: &BTreeSet<String>) -> Option<String> {
    let b = scene.subtree_aabb(object_id).ok()?;
    let mut best: Option<(f64, &str)> = None;
    for n in scene.nodes() {
        if n.id == object_id || exclude.contains(&n.id) {
            continue;
        }
        let Ok(s) = scene.node_aabb(&n.id) else { continue };
        let overlaps = s.min.x < b.max.x && b.min.x < s.max.x && s.min.y < b.max.y && b.min.y < s.max.y;
        if overlaps && s.max.z <= b.min.z + SNAP_CLEARANCE && best.is_none_or(|(z, _)| s.max.z > z) {
            best = Some((s.max.z, &n.id));
        }
    }
    best.map(|(_, id)| id.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{parse_annotations, NodeKind, TriMesh};
    use crate::usd::{mesh_prim, Attribute};
    use std::collections::BTreeMap;

    fn node(id: &str, label: &str) -> InstanceNode {
        InstanceNode {
            id: id.into(),
            label: label.into(),
            kind: NodeKind::Object,
            parent: None,
            faces: vec![],
            regions: BTreeMap::new(),
        }
    }

    #[test]
    fn classification() {
        let labels: BTreeSet<String> = ["wall", "floor", "ceiling"].map(String::from).into();
        let none = BTreeSet::new();
        assert_eq!(classify_structural(&node("w", "wall"), &labels, &none), NodeClass::Structural);
        assert_eq!(classify_structural(&node("w", " Floor "), &labels, &none), NodeClass::Structural);
        assert_eq!(classify_structural(&node("c", "cabinet"), &labels, &none), NodeClass::StaticObj);
        let m: BTreeSet<String> = ["drawer_7".to_string()].into();
        assert_eq!(classify_structural(&node("drawer_7", "wall"), &labels, &m), NodeClass::Manipulated);
    }

    /// Two triangles forming a unit square centered at (1, 2, 3).
    fn square_scene(grasp: bool) -> AnnotatedScene {
        let v = vec![
            Point::new(0.5, 1.5, 3.0),
            Point::new(1.5, 1.5, 3.0),
            Point::new(1.5, 2.5, 3.0),
            Point::new(0.5, 2.5, 3.0),
            Point::new(0.0, 0.0, 0.0),
            Point::new(1.0, 0.0, 0.0),
            Point::new(0.0, 1.0, 0.0),
        ];
        let mesh = TriMesh::new(v, vec![[0, 1, 2], [0, 2, 3], [4, 5, 6]]).unwrap();
        let regions = if grasp { r#", "regions": {"graspable": [0, 1]}"# } else { "" };
        let json = format!(
            r#"{{"version": "1", "nodes": [
                {{"id": "box_1", "label": "box", "kind": "object", "faces": [2]}},
                {{"id": "lid_2", "label": "lid", "kind": "part", "parent": "box_1", "faces": [0, 1]{regions}}}
            ], "articulations": []}}"#
        );
        parse_annotations(&json, mesh).unwrap()
    }

    #[test]
    fn grasp_point_is_region_mean() {
        let s = square_scene(true);
        let p = compute_grasp_point(&s, "lid_2").unwrap();
        assert!((p - Point::new(1.0, 2.0, 3.0)).norm() < 1e-12);
        assert_eq!(
            compute_grasp_point(&square_scene(false), "lid_2"),
            Err(SimError::NoGraspRegion("lid_2".into()))
        );
        assert_eq!(compute_grasp_point(&s, "nope"), Err(SimError::UnknownId("nope".into())));
    }

    fn doc_with_cabinet() -> UsdDocument {
        let mesh = TriMesh::new(
            vec![Point::origin(), Point::new(1.0, 0.0, 0.0), Point::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let mut doc = UsdDocument::new();
        doc.root.children.push(
            Prim::new("cabinet_1", Some("Xform"))
                .with_attr("label", Attribute::string("cabinet").custom())
                .with_child(mesh_prim("visual", &mesh)),
        );
        doc
    }

    #[test]
    fn ground_fixing() {
        let doc = doc_with_cabinet();
        let out = fix_to_ground(&doc, "/cabinet_1").unwrap();
        let j = out.prim_at("/joints/cabinet_1_fixed").unwrap();
        assert_eq!(j.type_name.as_deref(), Some("PhysicsFixedJoint"));
        assert_eq!(j.relationships["physics:body0"], None);
        assert_eq!(j.relationships["physics:body1"].as_deref(), Some("/cabinet_1"));
        assert!(out.prim_at("/cabinet_1").unwrap().attr("physics:kinematicEnabled").is_none());
        assert_eq!(
            fix_to_ground(&out, "/cabinet_1"),
            Err(SimError::PrimExists("/joints/cabinet_1_fixed".into()))
        );
        assert_eq!(fix_to_ground(&doc, "/nope"), Err(SimError::UnknownPath("/nope".into())));
        let text = crate::usd::emit_usda(&out);
        assert_eq!(crate::usd::parse_usda(&text).unwrap(), out);
    }
}
