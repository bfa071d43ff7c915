//! Object insertion: pick a target with the model, find its surface, size
//! the object, place it clear of everything else and apply a guarded script.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Config;
use crate::geometry::{
    aabb_overlap, ransac_plane, Aabb, GeometryError, PlaneOrientation, PlaneSurface, Point, RansacParams,
    SurfaceConstraint, Vec3,
};
use crate::guard::{apply_script, check, parse_script, ApplyError, GuardPolicy, GuardReport};
use crate::llm::{query_placement, query_scale, query_script, LlmError, LlmSession, PlacementAnswer, ScriptContext};
use crate::scene::{AnnotatedScene, TriMesh};
use crate::usd::{build_descriptive, emit_usda, is_identifier, parse_usda, prim_names, UsdDocument, Value};

/// Parent prim for inserted objects.
pub const INSERT_ROOT: &str = "/scene";

pub struct InsertionJob {
    pub scene: AnnotatedScene,
    /// Text of the scene document to augment.
    pub scene_usd: String,
    /// How the scene file is named to the model.
    pub scene_usd_path: String,
    pub object_mesh: TriMesh,
    /// Asset path the new prim references.
    pub object_asset: String,
    pub object_label: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InsertionParams {
    pub max_attempts: usize,
    pub margin: f64,
    pub ransac: RansacParams,
    pub guard: GuardPolicy,
}

impl Default for InsertionParams {
    fn default() -> Self {
        Self::from_config(&Config::default())
    }
}

impl InsertionParams {
    pub fn from_config(c: &Config) -> Self {
        Self {
            max_attempts: c.insertion.max_attempts,
            margin: c.insertion.margin,
            ransac: RansacParams {
                dist_thresh: c.ransac.dist_thresh,
                iters: c.ransac.iters,
                seed: c.seed,
            },
            guard: GuardPolicy::from_config(&c.guard),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    /// Center of the object's box at this attempt.
    pub position: Point,
    pub collided: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementResult {
    /// Center of the placed object's box.
    pub position: Point,
    /// Translate op that puts the scaled object there.
    pub translate: Vec3,
    pub scale: f64,
    /// Node id of the support.
    pub target_id: String,
    pub attempts: usize,
    pub attempt_trace: Vec<Attempt>,
    /// Unit direction from the surface toward the object.
    pub offset_direction: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Input,
    Descriptive,
    PlacementTarget,
    Surface,
    Scale,
    Placement,
    Script,
    Guard,
    Apply,
    Verify,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).expect("stage serializes");
        f.write_str(v.as_str().unwrap_or("?"))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlacementError {
    #[error("degenerate surface: {0}")]
    DegenerateSurface(String),
    #[error("object footprint {object:?} does not fit surface span {surface:?}")]
    ObjectTooLarge { object: [f64; 2], surface: [f64; 2] },
    #[error("no collision-free spot after {attempts} attempts")]
    PlacementExhausted { attempts: usize, trace: Vec<Attempt> },
}

#[derive(Debug, Error)]
pub enum StageCause {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error("script rejected with {} violation(s)", .0.violations.len())]
    Guard(GuardReport),
    #[error(transparent)]
    Apply(#[from] ApplyError),
}

#[derive(Debug, Error)]
#[error("insertion failed at stage `{stage}`: {cause}")]
pub struct InsertionError {
    pub stage: Stage,
    pub cause: StageCause,
}

fn at<E: Into<StageCause>>(stage: Stage) -> impl FnOnce(E) -> InsertionError {
    move |e| InsertionError {
        stage,
        cause: e.into(),
    }
}

fn invalid(stage: Stage, msg: impl Into<String>) -> InsertionError {
    InsertionError {
        stage,
        cause: StageCause::Invalid(msg.into()),
    }
}

/// Center of the object's box for the first attempt.
///
/// Horizontal: inlier mean raised by half the object height. Vertical: inlier
/// mean pushed off the wall by half the object depth along the normal, on
/// the side facing `interior_hint`. `object_aabb` must already be scaled.
pub fn compute_initial_position(
    surface: &PlaneSurface,
    object_aabb: &Aabb,
    constraint: SurfaceConstraint,
    interior_hint: &Point,
) -> Result<(Point, Vec3), PlacementError> {
    if surface.inlier_points.len() < 3 {
        return Err(PlacementError::DegenerateSurface(format!(
            "{} inlier(s), need 3",
            surface.inlier_points.len()
        )));
    }
    let mean = surface.inlier_mean().expect("non-empty");
    let ext = object_aabb.extent();
    let horizontal = match constraint {
        SurfaceConstraint::Horizontal => true,
        SurfaceConstraint::Vertical => false,
        SurfaceConstraint::Any => surface.orientation != PlaneOrientation::Vertical,
    };
    if horizontal {
        Ok((mean + Vec3::new(0.0, 0.0, ext.z / 2.0), Vec3::z()))
    } else {
        let n = surface.normal;
        let depth = n.abs().dot(&ext);
        let dir = if (interior_hint - mean).dot(&n) < 0.0 { -n } else { n };
        Ok((mean + dir * (depth / 2.0), dir))
    }
}

/// Random in-plane offset from the inlier mean, drawn so that mean plus
/// offset stays inside the inliers' 2D bounds.
pub fn retry_offset(surface: &PlaneSurface, rng: &mut impl Rng) -> [f64; 2] {
    let (Some(mean), Some((lo, hi))) = (surface.inlier_mean(), surface.plane_bounds()) else {
        return [0.0, 0.0];
    };
    let m = surface.to_plane_coords(&mean);
    let mut out = [0.0; 2];
    for k in 0..2 {
        if hi[k] > lo[k] {
            let t = rng.gen_range(lo[k]..=hi[k]);
            out[k] = t - m[k];
        }
    }
    out
}

/// Ids of nodes whose box overlaps `b`, skipping `exclude`.
pub fn colliding_nodes(scene: &AnnotatedScene, b: &Aabb, margin: f64, exclude: &[String]) -> Vec<String> {
    scene
        .nodes()
        .iter()
        .filter(|n| !exclude.contains(&n.id))
        .filter(|n| scene.node_aabb(&n.id).is_ok_and(|nb| aabb_overlap(b, &nb, margin)))
        .map(|n| n.id.clone())
        .collect()
}

/// The target and its parts rest under the object, so they never count.
fn collision_exclusions(scene: &AnnotatedScene, target_id: &str) -> Vec<String> {
    let mut ex = vec![target_id.to_string()];
    ex.extend(scene.children(target_id).map(|c| c.id.clone()));
    ex
}

/// Tries the surface mean first, then random in-plane offsets, until the
/// scaled object box clears every node except the target.
pub fn place_with_retries(
    job: &InsertionJob,
    target: &PlacementAnswer,
    surface: &PlaneSurface,
    scale: f64,
    params: &InsertionParams,
) -> Result<PlacementResult, PlacementError> {
    let local = job
        .object_mesh
        .aabb()
        .ok_or_else(|| PlacementError::DegenerateSurface("object mesh is empty".into()))?;
    let ext = local.extent() * scale;
    let scaled = Aabb::from_center_extent(Point::origin(), ext);

    let (u, v) = surface.basis();
    let footprint = [u.abs().dot(&ext), v.abs().dot(&ext)];
    let span = surface
        .plane_bounds()
        .map_or([0.0, 0.0], |(lo, hi)| [hi[0] - lo[0], hi[1] - lo[1]]);
    if footprint[0] >= span[0] && footprint[1] >= span[1] {
        return Err(PlacementError::ObjectTooLarge {
            object: footprint,
            surface: span,
        });
    }

    let hint = job.scene.centroid();
    let (start, dir) = compute_initial_position(surface, &scaled, target.surface_constraint, &hint)?;
    let exclude = collision_exclusions(&job.scene, &target.target_id);
    let mut rng = ChaCha8Rng::seed_from_u64(job.seed);
    let mut trace = Vec::new();
    for k in 0..params.max_attempts {
        let position = if k == 0 {
            start
        } else {
            let o = retry_offset(surface, &mut rng);
            start + u * o[0] + v * o[1]
        };
        let b = Aabb::from_center_extent(position, ext);
        let collided = colliding_nodes(&job.scene, &b, params.margin, &exclude);
        let done = collided.is_empty();
        trace.push(Attempt { position, collided });
        if done {
            return Ok(PlacementResult {
                position,
                translate: position.coords - local.center().coords * scale,
                scale,
                target_id: target.target_id.clone(),
                attempts: k + 1,
                attempt_trace: trace,
                offset_direction: dir,
            });
        }
    }
    Err(PlacementError::PlacementExhausted {
        attempts: params.max_attempts,
        trace,
    })
}

/// Prim path for the new object: `/scene/<label>_new`, suffixed when taken.
pub fn insertion_prim_path(doc: &UsdDocument, label: &str) -> String {
    let mut base: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    if !is_identifier(&base) {
        base.insert(0, '_');
    }
    let base = format!("{base}_new");
    let mut name = base.clone();
    let mut k = 2;
    while doc.prim_at(&format!("{INSERT_ROOT}/{name}")).is_some() {
        name = format!("{base}_{k}");
        k += 1;
    }
    format!("{INSERT_ROOT}/{name}")
}

/// Everything a run produced besides the document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsertionOutcome {
    pub prim_path: String,
    pub surface_normal: Vec3,
    pub surface_inliers: usize,
    pub scale_raw: f64,
    pub scale_clamped: bool,
    pub script: String,
    pub placement: PlacementResult,
}

/// The whole pipeline. Returns the augmented document; the input text is
/// never modified, so a failure leaves nothing half-written.
pub fn run_insertion(
    job: &InsertionJob,
    session: &mut LlmSession,
    params: &InsertionParams,
) -> Result<(UsdDocument, InsertionOutcome), InsertionError> {
    if job.object_label.trim().is_empty() {
        return Err(invalid(Stage::Input, "empty object label"));
    }
    if job.object_mesh.is_empty() {
        return Err(invalid(Stage::Input, "object mesh has no faces"));
    }
    let doc = parse_usda(&job.scene_usd).map_err(|e| invalid(Stage::Input, format!("scene document: {e}")))?;

    let descriptive = emit_usda(&build_descriptive(&job.scene));

    let answer = query_placement(session, &descriptive, &job.object_label).map_err(at(Stage::PlacementTarget))?;
    let names = prim_names(&job.scene);
    let index = names
        .iter()
        .position(|n| *n == answer.target_id)
        .ok_or_else(|| invalid(Stage::PlacementTarget, format!("`{}` is not a scene node", answer.target_id)))?;
    let target = PlacementAnswer {
        target_id: job.scene.nodes()[index].id.clone(),
        surface_constraint: answer.surface_constraint,
    };

    let faces = job.scene.subtree_faces(&target.target_id).map_err(|e| invalid(Stage::Surface, e.to_string()))?;
    let points = job.scene.face_points(&faces);
    let ransac = RansacParams {
        seed: job.seed,
        ..params.ransac
    };
    let surface = ransac_plane(&points, &ransac, target.surface_constraint).map_err(at(Stage::Surface))?;

    let extent = job.object_mesh.aabb().expect("non-empty").extent();
    let scale = query_scale(session, &job.object_label, [extent.x, extent.y, extent.z]).map_err(at(Stage::Scale))?;

    let placement = place_with_retries(job, &target, &surface, scale.scale, params).map_err(at(Stage::Placement))?;

    let prim_path = insertion_prim_path(&doc, &job.object_label);
    let ctx = ScriptContext {
        scene_usd_path: job.scene_usd_path.clone(),
        object_label: job.object_label.clone(),
        object_path: job.object_asset.clone(),
        prim_path: prim_path.clone(),
        position: placement.translate.into(),
        scale: placement.scale,
    };
    let script = query_script(session, &ctx).map_err(at(Stage::Script))?;

    let policy = params.guard.clone().with_allowed_assets([job.object_asset.clone()]);
    let program = check(parse_script(&script), &policy).map_err(|r| InsertionError {
        stage: Stage::Guard,
        cause: StageCause::Guard(r),
    })?;

    let out = apply_script(&doc, &program).map_err(at(Stage::Apply))?;

    verify(&doc, &out, job, &prim_path, &placement, params).map_err(|m| invalid(Stage::Verify, m))?;

    Ok((
        out,
        InsertionOutcome {
            prim_path,
            surface_normal: surface.normal,
            surface_inliers: surface.inlier_points.len(),
            scale_raw: scale.raw,
            scale_clamped: scale.clamped,
            script,
            placement,
        },
    ))
}

/// Checks the applied script did what the placement asked and nothing else.
fn verify(
    before: &UsdDocument,
    after: &UsdDocument,
    job: &InsertionJob,
    prim_path: &str,
    placement: &PlacementResult,
    params: &InsertionParams,
) -> Result<(), String> {
    let p = after.prim_at(prim_path).ok_or("script did not define the object prim")?;
    if p.references.as_deref() != Some(job.object_asset.as_str()) {
        return Err(format!("object prim does not reference `{}`", job.object_asset));
    }
    let close = |a: &[f64; 3], b: [f64; 3]| (0..3).all(|k| (a[k] - b[k]).abs() <= 1e-6 * (1.0 + b[k].abs()));
    let t = match p.attr("xformOp:translate") {
        Some(Value::Vec3(t)) if close(t, placement.translate.into()) => *t,
        other => return Err(format!("translate is {other:?}, expected {:?}", placement.translate)),
    };
    let s = match p.attr("xformOp:scale") {
        Some(Value::Vec3(s)) if close(s, [placement.scale; 3]) => *s,
        other => return Err(format!("scale is {other:?}, expected {}", placement.scale)),
    };
    let local = job.object_mesh.aabb().expect("non-empty");
    let placed = Aabb::new(
        Point::new(local.min.x * s[0] + t[0], local.min.y * s[1] + t[1], local.min.z * s[2] + t[2]),
        Point::new(local.max.x * s[0] + t[0], local.max.y * s[1] + t[1], local.max.z * s[2] + t[2]),
    );
    let hits = colliding_nodes(
        &job.scene,
        &placed,
        params.margin,
        &collision_exclusions(&job.scene, &placement.target_id),
    );
    if !hits.is_empty() {
        return Err(format!("applied transform collides with {hits:?}"));
    }
    if strip_insert(after, prim_path, before) != *before {
        return Err("script changed prims outside the inserted subtree".into());
    }
    Ok(())
}

/// `after` without the inserted prim and any ancestors it created.
fn strip_insert(after: &UsdDocument, prim_path: &str, before: &UsdDocument) -> UsdDocument {
    let mut out = after.clone();
    let mut path = prim_path.to_string();
    loop {
        let Some((parent, name)) = path.rsplit_once('/') else { break };
        let parent = if parent.is_empty() { "/" } else { parent };
        if before.prim_at(&path).is_some() {
            break;
        }
        if let Some(pp) = out.prim_at_mut(parent) {
            pp.children.retain(|c| c.name != name);
        }
        if parent == "/" {
            break;
        }
        path = parent.to_string();
        // stop at the first ancestor that still has other content
        if out.prim_at(&path).is_some_and(|p| !p.children.is_empty()) {
            break;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn square(z: f64, n: usize) -> PlaneSurface {
        let mut pts = Vec::new();
        for i in 0..=n {
            for j in 0..=n {
                pts.push(Point::new(i as f64 / n as f64, j as f64 / n as f64, z));
            }
        }
        PlaneSurface::new(Vec3::z(), z, pts)
    }

    #[test]
    fn initial_position_horizontal() {
        let s = PlaneSurface::new(
            Vec3::z(),
            1.0,
            vec![
                Point::new(0.0, 0.0, 1.0),
                Point::new(2.0, 0.0, 1.0),
                Point::new(0.0, 2.0, 1.0),
                Point::new(2.0, 2.0, 1.0),
            ],
        );
        let obj = Aabb::from_center_extent(Point::origin(), Vec3::new(0.3, 0.3, 0.4));
        let (p, _) = compute_initial_position(&s, &obj, SurfaceConstraint::Horizontal, &Point::origin()).unwrap();
        assert_relative_eq!(p, Point::new(1.0, 1.0, 1.2), epsilon = 1e-12);
        let cube = Aabb::from_center_extent(Point::origin(), Vec3::new(1.0, 1.0, 1.0));
        let (p, _) = compute_initial_position(&square(0.0, 4), &cube, SurfaceConstraint::Horizontal, &Point::origin())
            .unwrap();
        assert_relative_eq!(p, Point::new(0.5, 0.5, 0.5), epsilon = 1e-12);
    }

    #[test]
    fn initial_position_vertical_faces_interior() {
        let pts: Vec<Point> = (0..20).map(|k| Point::new(3.0, (k % 5) as f64 * 0.5, (k / 5) as f64 * 0.5)).collect();
        let wall = PlaneSurface::new(Vec3::x(), 3.0, pts);
        let poster = Aabb::from_center_extent(Point::origin(), Vec3::new(0.02, 0.6, 0.9));
        let (p, dir) =
            compute_initial_position(&wall, &poster, SurfaceConstraint::Vertical, &Point::new(1.5, 1.0, 1.0)).unwrap();
        assert_relative_eq!(p.x, 2.99, epsilon = 1e-12);
        assert_relative_eq!(dir, -Vec3::x());
    }

    #[test]
    fn degenerate_surface() {
        let s = PlaneSurface::new(Vec3::z(), 0.0, vec![Point::origin(), Point::new(1.0, 0.0, 0.0)]);
        let b = Aabb::from_center_extent(Point::origin(), Vec3::new(1.0, 1.0, 1.0));
        assert!(matches!(
            compute_initial_position(&s, &b, SurfaceConstraint::Horizontal, &Point::origin()),
            Err(PlacementError::DegenerateSurface(_))
        ));
    }

    #[test]
    fn offsets_stay_in_bounds_and_repeat() {
        let s = square(0.0, 10);
        let m = s.to_plane_coords(&s.inlier_mean().unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let first: Vec<[f64; 2]> = (0..1000).map(|_| retry_offset(&s, &mut rng)).collect();
        for o in &first {
            for k in 0..2 {
                let c = m[k] + o[k];
                assert!((-1e-12..=1.0 + 1e-12).contains(&c), "{o:?}");
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let again: Vec<[f64; 2]> = (0..1000).map(|_| retry_offset(&s, &mut rng)).collect();
        assert_eq!(first, again);
        let single = PlaneSurface::new(Vec3::z(), 0.0, vec![Point::new(0.3, 0.2, 0.0)]);
        assert_eq!(retry_offset(&single, &mut rng), [0.0, 0.0]);
    }

    #[test]
    fn prim_path_avoids_collisions() {
        let mut doc = UsdDocument::new();
        assert_eq!(insertion_prim_path(&doc, "teddy bear"), "/scene/teddy_bear_new");
        doc.root.children.push(
            crate::usd::Prim::new("scene", None).with_child(crate::usd::Prim::new("pillow_new", None)),
        );
        assert_eq!(insertion_prim_path(&doc, "pillow"), "/scene/pillow_new_2");
        assert_eq!(insertion_prim_path(&doc, "3d"), "/scene/_3d_new");
    }

    #[test]
    fn stage_names() {
        assert_eq!(Stage::PlacementTarget.to_string(), "placement_target");
        assert_eq!(Stage::Verify.to_string(), "verify");
    }
}
