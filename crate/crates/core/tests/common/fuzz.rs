use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scanstage::guard::{apply_script, check, parse_script, validate, Arg, GuardPolicy, Literal, Verdict, ViolationReason};
use scanstage::usd::{emit_usda, parse_usda, Prim, Specifier, UsdDocument};

/// Attack scripts under `fixtures/scripts/attacks` and the reason each must
/// be rejected for first.
pub const ATTACKS: [(&str, ViolationReason); 12] = [
    ("01_os_remove.txt", ViolationReason::BadImport),
    ("02_foreign_import.txt", ViolationReason::BadImport),
    ("03_aliased_import.txt", ViolationReason::BadImport),
    ("04_from_import.txt", ViolationReason::BadImport),
    ("05_delete_prim.txt", ViolationReason::NotAllowlisted),
    ("06_attribute_chain.txt", ViolationReason::NotAllowlisted),
    ("07_exec.txt", ViolationReason::NotAllowlisted),
    ("08_variable_arg.txt", ViolationReason::NonLiteralArg),
    ("09_nested_call_arg.txt", ViolationReason::NonLiteralArg),
    ("10_asset_traversal.txt", ViolationReason::PathEscape),
    ("11_absolute_asset.txt", ViolationReason::PathEscape),
    ("12_prim_path_escape.txt", ViolationReason::PathEscape),
];

const CALLEES: [&str; 9] = [
    "define_prim",
    "add_reference",
    "set_translate",
    "set_scale",
    "set_attribute",
    "usd_core.define_prim",
    "delete_prim",
    "os.system",
    "usd_core.set_attribute",
];
const PATHS: [&str; 9] = ["/scene", "/scene/a", "/scene/a/b", "/bed_3", "/floor_1", "/joints", "/", "../x", "/scene/b"];
const TYPES: [&str; 4] = ["Xform", "Mesh", "", "Bad Type"];
const NAMES: [&str; 8] = ["label", "xformOp:translate", "note", "physics:axis", "points", "info:id", "bad name", "xformOpOrder"];
const ASSETS: [&str; 4] = ["objects/pillow.obj", "../up.obj", "/abs.obj", "a/b.usda"];

fn literal(rng: &mut ChaCha8Rng) -> String {
    match rng.gen_range(0..7) {
        0 => format!("{:?}", PATHS[rng.gen_range(0..PATHS.len())]),
        1 => format!("{:?}", NAMES[rng.gen_range(0..NAMES.len())]),
        2 => format!("{:?}", TYPES[rng.gen_range(0..TYPES.len())]),
        3 => format!("{:?}", ASSETS[rng.gen_range(0..ASSETS.len())]),
        4 => format!("({}, {}, {})", rng.gen_range(-5..5), rng.gen_range(-2.0..2.0), 0.5),
        5 => rng.gen_range(-3..4).to_string(),
        _ => "x".into(),
    }
}

fn random_program(rng: &mut ChaCha8Rng) -> String {
    let mut text = String::new();
    match rng.gen_range(0..10) {
        0 => text.push_str("import os\n"),
        1..=6 => text.push_str("import usd_core\n"),
        _ => {}
    }
    for _ in 0..rng.gen_range(0..7) {
        let callee = CALLEES[rng.gen_range(0..CALLEES.len())];
        let args: Vec<String> = (0..rng.gen_range(1..4))
            .map(|k| {
                if k == 0 && rng.gen_bool(0.8) {
                    format!("{:?}", PATHS[rng.gen_range(0..PATHS.len())])
                } else {
                    literal(rng)
                }
            })
            .collect();
        text.push_str(&format!("{callee}({})\n", args.join(", ")));
    }
    if rng.gen_bool(0.05) {
        text.push_str("while True: pass\n");
    }
    text
}

const XFORM_ATTRS: [&str; 3] = ["xformOp:translate", "xformOp:scale", "xformOpOrder"];

/// Every difference between `before` and `after` must be one of the five
/// sanctioned effects, attributed to a call of the program.
fn assert_sanctioned(before: &UsdDocument, after: &UsdDocument, attr_names: &BTreeSet<String>, ctx: &str) {
    assert_eq!(before.default_prim, after.default_prim, "{ctx}");
    let old: Vec<(String, &Prim)> = before.all_prims();
    let new: Vec<(String, &Prim)> = after.all_prims();
    for (path, _) in &old {
        assert!(after.prim_at(path).is_some(), "{ctx}: {path} removed");
    }
    for (path, p) in &new {
        if path == "/" {
            continue;
        }
        assert!(p.api_schemas.is_empty() || before.prim_at(path).is_some(), "{ctx}");
        match before.prim_at(path) {
            None => {
                assert_eq!(p.specifier, Specifier::Def, "{ctx}");
                assert!(p.relationships.is_empty(), "{ctx}: {path} gained a relationship");
                for name in p.attributes.keys() {
                    assert!(XFORM_ATTRS.contains(&name.as_str()) || attr_names.contains(name), "{ctx}: {path}.{name}");
                }
            }
            Some(q) => {
                assert_eq!((p.specifier, &p.type_name, &p.api_schemas), (q.specifier, &q.type_name, &q.api_schemas), "{ctx}");
                assert_eq!(p.relationships, q.relationships, "{ctx}: {path}");
                let kept: Vec<&String> = p.children.iter().map(|c| &c.name).filter(|n| q.child(n).is_some()).collect();
                let orig: Vec<&String> = q.children.iter().map(|c| &c.name).collect();
                assert_eq!(kept, orig, "{ctx}: {path} children reordered");
                for (name, a) in &p.attributes {
                    if q.attributes.get(name) != Some(a) {
                        assert!(XFORM_ATTRS.contains(&name.as_str()) || attr_names.contains(name), "{ctx}: {path}.{name}");
                    }
                }
                for name in q.attributes.keys() {
                    assert!(p.attributes.contains_key(name), "{ctx}: {path}.{name} removed");
                }
            }
        }
    }
}

/// Runs `n` random programs through guard and interpreter against `doc`.
/// Panics on any effect outside the five sanctioned kinds. Returns how many
/// programs were allowed and how many applied cleanly.
pub fn fuzz_closure(doc: &UsdDocument, n: usize, seed: u64) -> (usize, usize) {
    let policy = GuardPolicy::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut allowed, mut applied) = (0, 0);
    for i in 0..n {
        let text = random_program(&mut rng);
        let program = parse_script(&text);
        let names: BTreeSet<String> = program
            .statements
            .iter()
            .filter(|c| c.callee.ends_with("set_attribute"))
            .filter_map(|c| match c.args.get(1) {
                Some(Arg::Literal(Literal::Str(s))) => Some(s.clone()),
                _ => None,
            })
            .collect();
        let report = validate(&program, &policy);
        let Ok(valid) = check(program, &policy) else {
            assert_eq!(report.verdict, Verdict::Rejected);
            assert!(!report.violations.is_empty());
            continue;
        };
        allowed += 1;
        let ctx = format!("program {i}:\n{text}");
        if let Ok(out) = apply_script(doc, &valid) {
            applied += 1;
            assert_sanctioned(doc, &out, &names, &ctx);
            out.validate().unwrap();
            assert_eq!(parse_usda(&emit_usda(&out)).unwrap(), out, "{ctx}");
        }
    }
    (allowed, applied)
}
