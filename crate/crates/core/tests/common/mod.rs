#![allow(dead_code)]

pub mod fuzz;
pub mod shapes;

use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scanstage::insertion::InsertionJob;
use scanstage::scene::{load_mesh, load_scene, AnnotatedScene};
use scanstage::usd::{build_descriptive, build_geometry_focused, emit_usda, read_mesh, Attribute, Prim, Specifier, UsdDocument, Value, ValueType};

pub const SCENES: [&str; 6] = ["bedroom", "cabinet", "cube", "desk", "obstacle", "office"];

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn scene(name: &str) -> AnnotatedScene {
    let dir = fixtures().join("scenes").join(name);
    load_scene(&dir.join("mesh.obj"), &dir.join("annotations.json")).unwrap()
}

/// Job inserting `fixtures/objects/<object>.obj` into the geometry-focused
/// document of a fixture scene.
pub fn insertion_job(scene_name: &str, object: &str, label: &str, seed: u64) -> InsertionJob {
    let s = scene(scene_name);
    let usd = emit_usda(&build_geometry_focused(&s));
    InsertionJob {
        scene: s,
        scene_usd: usd,
        scene_usd_path: format!("{scene_name}.usda"),
        object_mesh: load_mesh(&fixtures().join("objects").join(format!("{object}.obj"))).unwrap(),
        object_asset: format!("objects/{object}.obj"),
        object_label: label.into(),
        seed,
    }
}

const WORDS: [&str; 8] = ["bed", "desk", "Mug_2", "a", "_x", "lamp01", "wall", "Drawer"];
const TYPES: [&str; 6] = ["Xform", "Mesh", "Scope", "Cube", "PhysicsRevoluteJoint", "Material"];
const TEXT: &str = "ab Z09_-:./é\"\\\n\t{}[]()@#";

fn ident(rng: &mut ChaCha8Rng) -> String {
    let w = WORDS[rng.gen_range(0..WORDS.len())];
    if rng.gen_bool(0.5) {
        format!("{w}_{}", rng.gen_range(0..100))
    } else {
        w.to_string()
    }
}

fn text(rng: &mut ChaCha8Rng) -> String {
    let chars: Vec<char> = TEXT.chars().collect();
    (0..rng.gen_range(0..12)).map(|_| chars[rng.gen_range(0..chars.len())]).collect()
}

fn real(rng: &mut ChaCha8Rng) -> f64 {
    match rng.gen_range(0..5) {
        0 => 0.0,
        1 => rng.gen_range(-10..10) as f64,
        2 => rng.gen_range(-1.0..1.0) * 10f64.powi(rng.gen_range(-12..12)),
        3 => -0.0,
        _ => rng.gen_range(-1000.0..1000.0),
    }
}

fn value(rng: &mut ChaCha8Rng, t: ValueType) -> Value {
    let v3 = |rng: &mut ChaCha8Rng| [real(rng), real(rng), real(rng)];
    match t {
        ValueType::Bool => Value::Bool(rng.gen()),
        ValueType::Int => Value::Int(rng.gen_range(-1_000_000..1_000_000)),
        ValueType::Float | ValueType::Double => Value::Real(real(rng)),
        ValueType::String | ValueType::Token => Value::Text(text(rng)),
        ValueType::Float3 | ValueType::Double3 => Value::Vec3(v3(rng)),
        ValueType::Double2 => Value::Vec2([real(rng), real(rng)]),
        ValueType::Quatf => Value::Vec4([real(rng), real(rng), real(rng), real(rng)]),
        ValueType::Matrix4d => Value::Matrix(std::array::from_fn(|_| std::array::from_fn(|_| real(rng)))),
        ValueType::IntArray => Value::IntArray((0..rng.gen_range(0..6)).map(|_| rng.gen_range(-50..50)).collect()),
        ValueType::Float3Array | ValueType::Point3fArray => {
            Value::Vec3Array((0..rng.gen_range(0..5)).map(|_| v3(rng)).collect())
        }
        ValueType::TokenArray => Value::TextArray((0..rng.gen_range(0..4)).map(|_| text(rng)).collect()),
    }
}

fn prim(rng: &mut ChaCha8Rng, depth: usize, name: String) -> Prim {
    let mut p = Prim::new(name, None);
    if rng.gen_bool(0.8) {
        p.type_name = Some(TYPES[rng.gen_range(0..TYPES.len())].to_string());
    }
    if rng.gen_bool(0.1) {
        p.specifier = Specifier::Over;
    }
    if rng.gen_bool(0.2) {
        p.api_schemas = vec!["PhysicsRigidBodyAPI".into(), "PhysicsCollisionAPI".into()][..rng.gen_range(1..3)].to_vec();
    }
    if rng.gen_bool(0.15) {
        p.references = Some(format!("assets/{}.usda", ident(rng)));
    }
    for _ in 0..rng.gen_range(0..5) {
        let t = ValueType::ALL[rng.gen_range(0..ValueType::ALL.len())];
        let mut a = if rng.gen_bool(0.1) {
            Attribute::declared(t)
        } else {
            Attribute::new(t, value(rng, t))
        };
        a.custom = rng.gen_bool(0.2);
        a.uniform = rng.gen_bool(0.2);
        let name = if rng.gen_bool(0.3) {
            format!("{}:{}", ident(rng), ident(rng))
        } else {
            ident(rng)
        };
        p.attributes.insert(name, a);
    }
    for _ in 0..rng.gen_range(0..2) {
        let target = rng.gen_bool(0.8).then(|| format!("/{}/{}", ident(rng), ident(rng)));
        p.relationships.insert(format!("physics:{}", ident(rng)), target);
    }
    if depth < 3 {
        for k in 0..rng.gen_range(0..4) {
            let name = format!("{}_{k}", ident(rng));
            p.children.push(prim(rng, depth + 1, name));
        }
    }
    p
}

/// A valid random document, a pure function of `seed`.
pub fn random_document(seed: u64) -> UsdDocument {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut doc = UsdDocument::new();
    for k in 0..rng.gen_range(0..5) {
        let name = format!("{}_{k}", ident(&mut rng));
        doc.root.children.push(prim(&mut rng, 0, name));
    }
    if let Some(first) = doc.root.children.first() {
        if rng.gen_bool(0.7) {
            doc.default_prim = Some(first.name.clone());
        }
    }
    doc
}

const MESH_TOKENS: [&str; 5] = ["points", "point3f", "faceVertexIndices", "faceVertexCounts", "normals"];

/// Checks both flavor contracts for `s`, panicking with the first breach.
pub fn assert_flavor_contracts(name: &str, s: &AnnotatedScene) {
    let text = emit_usda(&build_descriptive(s));
    for t in MESH_TOKENS {
        assert!(!text.contains(t), "{name}: descriptive text contains `{t}`");
    }

    let doc = build_geometry_focused(s);
    let all = doc.all_prims();
    for (path, p) in &all {
        if p.type_name.as_deref() == Some("Mesh") {
            let depth = path.matches('/').count();
            assert_eq!(depth, 1, "{name}: mesh {path} is nested");
        }
    }
    for n in s.nodes() {
        let top = doc.prims().iter().filter(|p| p.attr("label") == Some(&Value::Text(n.label.clone())));
        assert!(top.count() >= 1, "{name}: no top-level prim for {}", n.id);
    }
    let meshes: Vec<_> = doc.prims().iter().filter_map(read_mesh).collect();
    let faces: usize = meshes.iter().map(|m| m.face_count()).sum();
    let owned: usize = s.nodes().iter().map(|n| n.faces.len()).sum();
    assert_eq!(faces, owned, "{name}: face count not conserved");
    // vertex sets agree after de-duplication
    let key = |p: &scanstage::geometry::Point| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()];
    let got: BTreeSet<[u64; 3]> = meshes.iter().flat_map(|m| m.vertices().iter().map(key)).collect();
    let all_faces: Vec<u32> = s.nodes().iter().flat_map(|n| n.faces.iter().copied()).collect();
    let want: BTreeSet<[u64; 3]> = s.face_points(&all_faces).iter().map(key).collect();
    assert_eq!(got, want, "{name}: vertex sets differ");
    let scaffolding = usize::from(!s.articulations().is_empty());
    assert_eq!(all.len(), s.nodes().len() + s.articulations().len() + scaffolding, "{name}: prim count");
}
