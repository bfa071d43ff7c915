use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    classify_structural, compute_grasp_point, find_support, fix_to_ground, snap_to_surface, NodeClass, SimError,
    SimParams, SNAP_CLEARANCE,
};
use crate::geometry::{convex_decompose, decimate_quadric, merge_weld, ConvexPiece, Vec3};
use crate::scene::{AnnotatedScene, ArticulationSpec, JointType, TriMesh};
use crate::usd::{emit_usda, join_path, joint_prim, mesh_prim, prim_names, Attribute, Prim, UsdDocument, Value,
    ValueType, JOINTS_SCOPE};

/// Prim holding every decimated structural and static mesh.
pub const STATIC_MERGED: &str = "static_merged";

const ROBOT_STANDOFF: f64 = 0.55;
const ROBOT_REACH: f64 = 0.85;
const PRISMATIC_SUCCESS: f64 = 0.2;
const REVOLUTE_SUCCESS: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointConfig {
    #[serde(rename = "type")]
    pub joint_type: JointType,
    pub axis: [f64; 3],
    pub pivot: [f64; 3],
    pub range: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTaskConfig {
    pub target_part_id: String,
    pub grasp_point: [f64; 3],
    pub joint: JointConfig,
    pub robot_standoff: f64,
    pub robot_reach: f64,
    /// Meters for prismatic joints, radians for revolute ones.
    pub success_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapReport {
    pub support_id: Option<String>,
    pub translation: [f64; 3],
    pub applied: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectReport {
    pub id: String,
    pub label: String,
    pub class: NodeClass,
    pub prim: String,
    pub faces_before: usize,
    pub faces_after: usize,
    pub keep_ratio: Option<f64>,
    pub decimation_target: Option<usize>,
    pub decimation_reached_target: Option<bool>,
    pub too_small_to_decimate: bool,
    pub collision_pieces: usize,
    pub max_concavity: Option<f64>,
    pub decomposition_limited: bool,
    pub fixes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedReport {
    pub prim: String,
    pub nodes: Vec<String>,
    pub faces: usize,
    pub structural_faces_before: usize,
    pub structural_faces_after: usize,
    pub structural_nodes: usize,
    pub static_faces_before: usize,
    pub static_faces_after: usize,
    pub static_nodes: usize,
    pub vertices_welded: usize,
    pub degenerate_faces_dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub target_part_id: String,
    pub parent_object_id: String,
    pub structural_ratio: f64,
    pub static_ratio: f64,
    pub objects: Vec<ObjectReport>,
    pub static_merged: MergedReport,
    pub snap: SnapReport,
    /// Settings the source material does not give, with the value used.
    pub assumed_defaults: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimBundle {
    pub usd: UsdDocument,
    /// Collision hulls by dynamic prim path.
    pub collision_pieces: BTreeMap<String, Vec<ConvexPiece>>,
    pub task: SimTaskConfig,
    pub report: SimReport,
}

impl SimBundle {
    pub fn scene_usda(&self) -> String {
        emit_usda(&self.usd)
    }

    pub fn task_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.task).expect("task serializes");
        s.push('\n');
        s
    }

    pub fn report_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.report).expect("report serializes");
        s.push('\n');
        s
    }
}

struct Processed {
    mesh: TriMesh,
    report: ObjectReport,
    pieces: Vec<ConvexPiece>,
}

/// Compiles the scene around one articulated part.
///
/// The part's parent object and all of its parts stay at full resolution,
/// become rigid bodies with convex collision pieces, and the parent is
/// fixed to the world. Every other node is decimated by class and welded
/// into one static mesh. The parent is snapped onto the node below it when
/// the gap exceeds 1 mm.
pub fn build_sim_bundle(scene: &AnnotatedScene, target_part_id: &str, params: &SimParams) -> Result<SimBundle, SimError> {
    let target = scene
        .node(target_part_id)
        .ok_or_else(|| SimError::UnknownId(target_part_id.to_string()))?;
    let art = scene
        .articulation(target_part_id)
        .ok_or_else(|| SimError::NoArticulation(target_part_id.to_string()))?;
    let grasp = compute_grasp_point(scene, target_part_id)?;
    let parent_id = target.parent.clone().unwrap_or_else(|| target.id.clone());

    let mut manipulated: BTreeSet<String> = BTreeSet::from([parent_id.clone()]);
    manipulated.extend(scene.children(&parent_id).map(|c| c.id.clone()));

    let snap = snap_parent(scene, &parent_id, &manipulated, params);
    let shift = if snap.applied { Vec3::from(snap.translation) } else { Vec3::zeros() };

    let names = prim_names(scene);
    let classes: Vec<NodeClass> = scene
        .nodes()
        .iter()
        .map(|n| classify_structural(n, &params.policy.structural_labels, &manipulated))
        .collect();

    let processed: Vec<Processed> = scene
        .nodes()
        .par_iter()
        .enumerate()
        .map(|(i, n)| {
            let class = classes[i];
            let mesh = scene.mesh().submesh(&n.faces).0.without_face_owner();
            let mut report = ObjectReport {
                id: n.id.clone(),
                label: n.label.clone(),
                class,
                prim: String::new(),
                faces_before: mesh.face_count(),
                faces_after: mesh.face_count(),
                keep_ratio: params.policy.ratio(class),
                decimation_target: None,
                decimation_reached_target: None,
                too_small_to_decimate: false,
                collision_pieces: 0,
                max_concavity: None,
                decomposition_limited: false,
                fixes: Vec::new(),
            };
            match params.policy.ratio(class) {
                Some(ratio) => {
                    let mut mesh = mesh;
                    if ratio < 1.0 && !mesh.is_empty() {
                        let d = decimate_quadric(&mesh, ratio);
                        report.decimation_target = Some(d.target_faces);
                        report.decimation_reached_target = Some(d.reached_target);
                        report.too_small_to_decimate = d.too_small;
                        if !d.too_small {
                            report.fixes.push("decimated".into());
                        }
                        mesh = d.mesh;
                    }
                    report.fixes.push("merged_static".into());
                    report.prim = join_path("/", STATIC_MERGED);
                    Processed {
                        mesh,
                        report,
                        pieces: Vec::new(),
                    }
                }
                None => {
                    let mesh = if shift == Vec3::zeros() { mesh } else { mesh.transformed(1.0, &shift) };
                    let d = convex_decompose(&mesh, &params.decomposition);
                    report.collision_pieces = d.pieces.len();
                    report.max_concavity = d.concavity.iter().copied().reduce(f64::max);
                    report.decomposition_limited = d.limited;
                    report.fixes.push("full_resolution".into());
                    report.fixes.push("convex_decomposition".into());
                    if snap.applied {
                        report.fixes.push("snapped_to_surface".into());
                    }
                    report.prim = join_path("/", &names[i]);
                    Processed {
                        mesh,
                        report,
                        pieces: d.pieces,
                    }
                }
            }
        })
        .collect();

    // static merge, in node order
    let mut merged_nodes = Vec::new();
    let mut inputs = Vec::new();
    for (i, p) in processed.iter().enumerate() {
        if classes[i] != NodeClass::Manipulated {
            let k = merged_nodes.len() as u32;
            merged_nodes.push(scene.nodes()[i].id.clone());
            let owned = p
                .mesh
                .clone()
                .with_face_owner(vec![k; p.mesh.face_count()])
                .expect("owner length matches");
            inputs.push(owned);
        }
    }
    let welded = merge_weld(&inputs, params.weld_eps);
    let owner = welded.mesh.face_owner().map(<[u32]>::to_vec).unwrap_or_default();
    let mut per_owner = vec![0usize; merged_nodes.len()];
    for &o in &owner {
        per_owner[o as usize] += 1;
    }

    let mut doc = UsdDocument::new();
    let mut objects = Vec::new();
    let mut collision_pieces = BTreeMap::new();
    let mut merged_report = MergedReport {
        prim: join_path("/", STATIC_MERGED),
        nodes: merged_nodes.clone(),
        faces: welded.mesh.face_count(),
        structural_faces_before: 0,
        structural_faces_after: 0,
        structural_nodes: 0,
        static_faces_before: 0,
        static_faces_after: 0,
        static_nodes: 0,
        vertices_welded: welded.vertices_welded,
        degenerate_faces_dropped: welded.degenerate_faces_dropped,
    };
    if !merged_nodes.is_empty() {
        let mut p = mesh_prim(STATIC_MERGED, &welded.mesh)
            .with_attr(
                "merged_nodes",
                Attribute::new(ValueType::TokenArray, Value::TextArray(merged_nodes.clone())).custom(),
            )
            .with_attr(
                "merged_face_owner",
                Attribute::new(ValueType::IntArray, Value::IntArray(owner.iter().map(|&o| o as i64).collect()))
                    .custom(),
            );
        p.api_schemas.push("PhysicsCollisionAPI".into());
        doc.root.children.push(p);
    }

    let mut k = 0;
    for (i, p) in processed.into_iter().enumerate() {
        let mut report = p.report;
        if classes[i] == NodeClass::Manipulated {
            let node = &scene.nodes()[i];
            let mut prim = Prim::new(&names[i], Some("Xform"))
                .with_attr("label", Attribute::string(&node.label).custom())
                .with_child(mesh_prim("visual", &p.mesh));
            prim.api_schemas.push("PhysicsRigidBodyAPI".into());
            for (j, piece) in p.pieces.iter().enumerate() {
                let hull = TriMesh::new(piece.hull_vertices.clone(), piece.hull_faces.clone())
                    .expect("hull indices are valid");
                let mut c = mesh_prim(&format!("collision_{j:02}"), &hull)
                    .with_attr("purpose", Attribute::token("guide").uniform());
                c.api_schemas.push("PhysicsCollisionAPI".into());
                prim.children.push(c);
            }
            doc.root.children.push(prim);
            collision_pieces.insert(report.prim.clone(), p.pieces);
        } else {
            report.faces_after = per_owner[k];
            k += 1;
            if classes[i] == NodeClass::Structural {
                merged_report.structural_faces_before += report.faces_before;
                merged_report.structural_faces_after += report.faces_after;
                merged_report.structural_nodes += 1;
            } else {
                merged_report.static_faces_before += report.faces_before;
                merged_report.static_faces_after += report.faces_after;
                merged_report.static_nodes += 1;
            }
        }
        objects.push(report);
    }

    let shifted = |a: &ArticulationSpec| ArticulationSpec {
        pivot: a.pivot + shift,
        ..a.clone()
    };
    let mut scope = Prim::new(JOINTS_SCOPE, Some("Scope"));
    for a in scene.articulations() {
        if !manipulated.contains(&a.part_id) {
            continue;
        }
        let part = scene.node_index(&a.part_id).expect("validated scene");
        let parent = scene.node_index(&parent_id).expect("validated scene");
        scope.children.push(joint_prim(
            &shifted(a),
            &format!("{}_joint", names[part]),
            &join_path("/", &names[parent]),
            &join_path("/", &names[part]),
        ));
    }
    doc.root.children.push(scope);
    let parent_index = scene.node_index(&parent_id).expect("validated scene");
    let doc = fix_to_ground(&doc, &join_path("/", &names[parent_index]))?;
    if let Some(r) = objects.iter_mut().find(|r| r.id == parent_id) {
        r.fixes.push("fixed_to_ground".into());
    }

    let art = shifted(art);
    let success_threshold = match art.joint_type {
        JointType::Prismatic => PRISMATIC_SUCCESS,
        JointType::Revolute => REVOLUTE_SUCCESS,
    };
    let task = SimTaskConfig {
        target_part_id: target_part_id.to_string(),
        grasp_point: (grasp + shift).coords.into(),
        joint: JointConfig {
            joint_type: art.joint_type,
            axis: art.axis.into(),
            pivot: art.pivot.coords.into(),
            range: art.range,
        },
        robot_standoff: ROBOT_STANDOFF,
        robot_reach: ROBOT_REACH,
        success_threshold,
    };

    let mut assumed = BTreeMap::new();
    if art.joint_type == JointType::Revolute {
        assumed.insert("success_threshold_revolute_rad".into(), serde_json::json!(REVOLUTE_SUCCESS));
    }
    assumed.insert("weld_eps".into(), serde_json::json!(params.weld_eps));
    assumed.insert("snap_clearance".into(), serde_json::json!(SNAP_CLEARANCE));
    assumed.insert(
        "structural_labels".into(),
        serde_json::json!(params.policy.structural_labels),
    );
    assumed.insert("concavity_thresh".into(), serde_json::json!(params.decomposition.concavity_thresh));
    assumed.insert("max_pieces".into(), serde_json::json!(params.decomposition.max_pieces));
    assumed.insert("max_depth".into(), serde_json::json!(params.decomposition.max_depth));

    Ok(SimBundle {
        usd: doc,
        collision_pieces,
        task,
        report: SimReport {
            target_part_id: target_part_id.to_string(),
            parent_object_id: parent_id,
            structural_ratio: params.policy.structural_ratio,
            static_ratio: params.policy.static_ratio,
            objects,
            static_merged: merged_report,
            snap,
            assumed_defaults: assumed,
        },
    })
}

fn snap_parent(
    scene: &AnnotatedScene,
    parent_id: &str,
    manipulated: &BTreeSet<String>,
    params: &SimParams,
) -> SnapReport {
    let Some(support) = find_support(scene, parent_id, manipulated) else {
        return SnapReport {
            support_id: None,
            translation: [0.0; 3],
            applied: false,
            note: Some("no support below the object".into()),
        };
    };
    match snap_to_surface(scene, parent_id, &support, &params.ransac) {
        Ok(t) => {
            let applied = t.norm() > SNAP_CLEARANCE;
            SnapReport {
                support_id: Some(support),
                translation: if applied { t.into() } else { [0.0; 3] },
                applied,
                note: (!applied).then(|| "already resting on the support".into()),
            }
        }
        Err(e) => SnapReport {
            support_id: Some(support),
            translation: [0.0; 3],
            applied: false,
            note: Some(format!("snap skipped: {e}")),
        },
    }
}
