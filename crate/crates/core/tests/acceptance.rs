//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use scanstage::geometry::{
    convex_decompose, decimate_quadric, point_in_hull, ransac_plane, Aabb, DecompositionParams, Point, RansacParams,
    SurfaceConstraint, Vec3,
};
use scanstage::guard::{apply_script, check, parse_script, validate, GuardPolicy, Verdict};
use scanstage::insertion::{run_insertion, InsertionParams};
use scanstage::llm::{LlmSession, MockBackend, Prompts};
use scanstage::scene::{load_mesh, RegionKind, TriMesh};
use scanstage::simprep::{build_sim_bundle, SimParams};
use scanstage::usd::{build_geometry_focused, emit_usda, parse_usda, UsdDocument, Value};

use common::shapes::{cube, noisy_plane, open_drawer_box, sampled_hausdorff, uv_sphere, DRAWER_PROBE};
use common::{fixtures, golden_dir, insertion_job, random_document, scene, SCENES};

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn round_trip() -> Result<String, String> {
    for seed in 0..100 {
        let doc = random_document(seed);
        let text = emit_usda(&doc);
        let back = parse_usda(&text).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(back == doc, || format!("seed {seed}: parse(emit(doc)) != doc"))?;
        ensure(emit_usda(&back) == text, || format!("seed {seed}: emit not a fixpoint"))?;
    }
    let mut files: Vec<_> = std::fs::read_dir(golden_dir())
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "usda"))
        .collect();
    files.sort();
    ensure(files.len() == 20, || format!("{} golden files, want 20", files.len()))?;
    for f in &files {
        let text = std::fs::read_to_string(f).map_err(|e| e.to_string())?;
        let doc = parse_usda(&text).map_err(|e| format!("{}: {e}", f.display()))?;
        ensure(emit_usda(&doc) == text, || format!("{} is not byte-stable", f.display()))?;
        ensure(parse_usda(&emit_usda(&doc)).as_ref() == Ok(&doc), || format!("{} drifts", f.display()))?;
    }
    Ok("100 random + 20 golden".into())
}

fn flavor_contracts() -> Result<String, String> {
    for name in SCENES {
        common::assert_flavor_contracts(name, &scene(name));
    }
    Ok(format!("{} scenes", SCENES.len()))
}

fn ransac_recovery() -> Result<String, String> {
    let cases = [
        (Vec3::z(), 0.8, SurfaceConstraint::Horizontal),
        (Vec3::new(1.0, 1.0, 0.0).normalize(), 1.5, SurfaceConstraint::Vertical),
        (Vec3::new(0.0, 1.0, 1.0).normalize(), -0.4, SurfaceConstraint::Any),
    ];
    let mut ok = 0;
    let mut worst = (0.0f64, 0.0f64);
    for (normal, offset, constraint) in cases {
        for seed in 0..10 {
            let pts = noisy_plane(seed, normal, offset, 0.002, 900, 100);
            let Ok(s) = ransac_plane(&pts, &RansacParams::default(), constraint) else {
                continue;
            };
            let sign = s.normal.dot(&normal).signum();
            let angle = (s.normal.dot(&normal).abs().min(1.0)).acos().to_degrees();
            let off = (s.offset * sign - offset).abs();
            worst = (worst.0.max(angle), worst.1.max(off));
            if angle <= 2.0 && off <= 0.01 {
                ok += 1;
            }
        }
    }
    ensure(ok >= 29, || format!("{ok}/30 recovered"))?;
    Ok(format!("{ok}/30, worst {:.3} deg, {:.4} m", worst.0, worst.1))
}

fn decimation() -> Result<String, String> {
    let sphere = uv_sphere(1.0, 50, 51);
    ensure(sphere.face_count() == 5000, || format!("sphere has {} faces", sphere.face_count()))?;
    let d = decimate_quadric(&sphere, 0.10);
    let faces = d.mesh.face_count();
    ensure(faces <= 500, || format!("{faces} faces at 0.10"))?;
    let diag = sphere.aabb().unwrap().diagonal();
    let h = sampled_hausdorff(&sphere, &d.mesh, 2000);
    ensure(h <= 0.02 * diag, || format!("hausdorff {h} > {}", 0.02 * diag))?;
    ensure(decimate_quadric(&sphere, 1.0).mesh == sphere, || "1.0 is not the identity".into())?;
    let counts: Vec<usize> = [0.1, 0.3, 0.5, 1.0]
        .iter()
        .map(|&r| decimate_quadric(&sphere, r).mesh.face_count())
        .collect();
    ensure(counts.windows(2).all(|w| w[0] <= w[1]), || format!("not monotone: {counts:?}"))?;
    Ok(format!("{faces} faces, hausdorff {:.4} ({:.2}% of diag), counts {counts:?}", h, 100.0 * h / diag))
}

fn contained(mesh: &TriMesh, what: &str) -> Result<usize, String> {
    let d = convex_decompose(mesh, &DecompositionParams::default());
    for v in mesh.vertices() {
        ensure(point_in_hull(&d.pieces, v, 1e-6), || format!("{what}: vertex {v:?} outside every hull"))?;
    }
    Ok(mesh.vertex_count())
}

fn decomposition() -> Result<String, String> {
    let pieces = convex_decompose(&cube(), &DecompositionParams::default()).pieces.len();
    ensure(pieces == 1, || format!("cube gives {pieces} pieces"))?;
    let drawer = open_drawer_box(4);
    let d = convex_decompose(&drawer, &DecompositionParams::default());
    ensure(!point_in_hull(&d.pieces, &Point::from(DRAWER_PROBE), 0.0), || "drawer cavity is filled".into())?;
    let mut checked = contained(&drawer, "drawer")? + contained(&cube(), "cube")?;
    for name in SCENES {
        let s = scene(name);
        for n in s.nodes() {
            checked += contained(&s.node_submesh(&n.id).unwrap(), &format!("{name}/{}", n.id))?;
        }
    }
    let mut objects: Vec<_> = std::fs::read_dir(fixtures().join("objects")).unwrap().map(|e| e.unwrap().path()).collect();
    objects.sort();
    for p in objects {
        checked += contained(&load_mesh(&p).unwrap(), &p.display().to_string())?;
    }
    Ok(format!("{checked} vertices contained"))
}

fn session() -> LlmSession {
    LlmSession::new(Box::new(MockBackend::default()), Prompts::builtin())
}

fn bounds(points: &[Point]) -> Aabb {
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    Aabb::new(lo, hi)
}

fn separated(a: &Aabb, b: &Aabb, margin: f64) -> bool {
    (0..3).any(|k| a.min[k] - b.max[k] > 2.0 * margin || b.min[k] - a.max[k] > 2.0 * margin)
}

fn placed_box(doc: &UsdDocument, path: &str, object: &TriMesh) -> Result<Aabb, String> {
    let p = doc.prim_at(path).ok_or_else(|| format!("{path} missing"))?;
    let (Some(Value::Vec3(t)), Some(Value::Vec3(s))) = (p.attr("xformOp:translate"), p.attr("xformOp:scale")) else {
        return Err(format!("{path} has no transform"));
    };
    let pts: Vec<Point> = object
        .vertices()
        .iter()
        .map(|v| Point::new(v.x * s[0] + t[0], v.y * s[1] + t[1], v.z * s[2] + t[2]))
        .collect();
    Ok(bounds(&pts))
}

fn check_placement(scene_name: &str, object: &str, seed: u64) -> Result<String, String> {
    let job = insertion_job(scene_name, object, object, seed);
    let params = InsertionParams::default();
    let (doc, out) = run_insertion(&job, &mut session(), &params).map_err(|e| format!("{scene_name}: {e}"))?;
    let (doc2, _) = run_insertion(&job, &mut session(), &params).map_err(|e| e.to_string())?;
    ensure(emit_usda(&doc) == emit_usda(&doc2), || format!("{scene_name}: reruns differ"))?;

    let b = placed_box(&doc, &out.prim_path, &job.object_mesh)?;
    let target = out.placement.target_id.as_str();
    let s = &job.scene;
    for n in s.nodes() {
        if n.id == target || n.parent.as_deref() == Some(target) {
            continue;
        }
        let nb = bounds(&s.face_points(&n.faces));
        ensure(separated(&b, &nb, params.margin), || format!("{scene_name}: object hits {}", n.id))?;
    }

    let pts = s.face_points(&s.subtree_faces(target).unwrap());
    let plane = ransac_plane(&pts, &RansacParams { seed, ..params.ransac }, SurfaceConstraint::Horizontal)
        .map_err(|e| e.to_string())?;
    let c = b.center();
    let height = plane.height_at(c.x, c.y).ok_or("vertical plane")?;
    let h = b.extent().z;
    let dz = c.z - height - h / 2.0;
    ensure(dz.abs() <= 1e-9, || format!("{scene_name}: center is {dz} off plane + h/2"))?;
    Ok(format!("{scene_name} on {target}"))
}

fn insertion() -> Result<String, String> {
    let a = check_placement("bedroom", "pillow", 7)?;
    let b = check_placement("desk", "bottle", 1)?;
    let job = insertion_job("obstacle", "mug", "mug", 11);
    let (_, out) = run_insertion(&job, &mut session(), &InsertionParams::default()).map_err(|e| e.to_string())?;
    let n = out.placement.attempts;
    ensure(n >= 2, || format!("obstacle placed in {n} attempt(s)"))?;
    Ok(format!("{a}, {b}, obstacle after {n} attempts"))
}

fn guard() -> Result<String, String> {
    let read = |rel: &str| std::fs::read_to_string(fixtures().join("scripts").join(rel)).unwrap();
    let doc = build_geometry_focused(&scene("bedroom"));
    let program = check(parse_script(&read("canonical.txt")), &GuardPolicy::default()).map_err(|r| format!("{r:?}"))?;
    let out = apply_script(&doc, &program).map_err(|e| e.to_string())?;
    let golden = std::fs::read_to_string(golden_dir().join("bedroom_pillow_inserted.usda")).unwrap();
    ensure(emit_usda(&out) == golden, || "canonical output differs from golden".into())?;

    let mut rejected = 0;
    for (file, reason) in common::fuzz::ATTACKS {
        let r = validate(&parse_script(&read(&format!("attacks/{file}"))), &GuardPolicy::default());
        ensure(r.verdict == Verdict::Rejected, || format!("{file} allowed"))?;
        ensure(r.violations[0].reason == reason, || format!("{file}: {:?}", r.violations[0]))?;
        rejected += 1;
    }
    ensure(rejected == 12, || format!("{rejected} attack cases"))?;
    let (allowed, applied) = common::fuzz::fuzz_closure(&doc, 10_000, 2024);
    Ok(format!("12/12 attacks rejected, fuzz 10000 ({allowed} allowed, {applied} applied)"))
}

fn sim_bundle() -> Result<String, String> {
    let s = scene("office");
    let b = build_sim_bundle(&s, "drawer_7", &SimParams::default()).map_err(|e| e.to_string())?;
    let t = &b.task;
    ensure(t.robot_standoff == 0.55 && t.robot_reach == 0.85 && t.success_threshold == 0.2, || {
        format!("constants {} {} {}", t.robot_standoff, t.robot_reach, t.success_threshold)
    })?;

    let region = s.node("drawer_7").unwrap().region(RegionKind::Graspable);
    let mut ids: Vec<u32> = region.iter().flat_map(|&f| s.mesh().faces()[f as usize]).collect();
    ids.sort_unstable();
    ids.dedup();
    let mut mean = [0.0; 3];
    for &v in &ids {
        for k in 0..3 {
            mean[k] += s.mesh().vertices()[v as usize][k] / ids.len() as f64;
        }
    }
    let err = (0..3).map(|k| (t.grasp_point[k] - mean[k]).abs()).fold(0.0, f64::max);
    ensure(err <= 1e-6, || format!("grasp point off by {err}"))?;

    let m = &b.report.static_merged;
    let budget = 0.10 * m.structural_faces_before as f64 + m.structural_nodes as f64;
    ensure(m.structural_faces_after as f64 <= budget, || {
        format!("structural {} > {budget}", m.structural_faces_after)
    })?;
    let static_budget = 0.30 * m.static_faces_before as f64 + m.static_nodes as f64;
    ensure(m.static_faces_after as f64 <= static_budget, || {
        format!("static {} > {static_budget}", m.static_faces_after)
    })?;

    let again = build_sim_bundle(&s, "drawer_7", &SimParams::default()).map_err(|e| e.to_string())?;
    ensure(b.scene_usda() == again.scene_usda(), || "scene.usda differs".into())?;
    ensure(b.task_json() == again.task_json(), || "task_config.json differs".into())?;
    ensure(b.report_json() == again.report_json(), || "report.json differs".into())?;
    Ok(format!(
        "structural {}/{} faces (budget {budget:.1})",
        m.structural_faces_after, m.structural_faces_before
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, Option<u64>, Check); 8] = [
        ("USDA round-trip", Some(5), round_trip),
        ("flavor contracts", Some(10), flavor_contracts),
        ("RANSAC recovery", None, ransac_recovery),
        ("decimation", None, decimation),
        ("convex decomposition", None, decomposition),
        ("insertion with mock backend", Some(20), insertion),
        ("script guard", None, guard),
        ("sim bundle", Some(30), sim_bundle),
    ];
    let quiet = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = match catch_unwind(AssertUnwindSafe(run)) {
            Ok(r) => r,
            Err(p) => Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())),
        };
        let took = start.elapsed();
        let result = match (result, limit) {
            (Ok(_), Some(l)) if took > Duration::from_secs(l) => Err(format!("took {took:.2?}, limit {l} s")),
            (r, _) => r,
        };
        match result {
            Ok(detail) => println!("PASS criterion {}: {name} ({took:.2?}) {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name} ({took:.2?}) {why}", i + 1);
            }
        }
    }
    std::panic::set_hook(quiet);
    println!("{}/8 criteria passed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
