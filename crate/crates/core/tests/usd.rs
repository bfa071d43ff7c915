mod common;

use scanstage::usd::{build_descriptive, build_geometry_focused, emit_usda, parse_usda, read_mesh, UsdError, Value};

use common::{assert_flavor_contracts, scene, SCENES};

#[test]
fn flavor_contracts_hold_on_every_fixture() {
    for name in SCENES {
        assert_flavor_contracts(name, &scene(name));
    }
}

#[test]
fn cabinet_descriptive_nests_the_drawer() {
    let doc = build_descriptive(&scene("cabinet"));
    let drawer = doc.prim_at("/cabinet_1/drawer_7").unwrap();
    assert_eq!(drawer.attr("joint_type"), Some(&Value::Text("prismatic".into())));
    assert!(drawer.attr("bbox_min").is_some() && drawer.attr("bbox_max").is_some());
    assert!(!emit_usda(&doc).contains("point3f"));
}

#[test]
fn cabinet_geometry_is_flat() {
    let s = scene("cabinet");
    let doc = build_geometry_focused(&s);
    let names: Vec<&str> = doc.prims().iter().map(|p| p.name.as_str()).collect();
    assert_eq!(names, ["cabinet_1", "drawer_7", "joints"]);
    let j = doc.prim_at("/joints/drawer_7_joint").unwrap();
    assert_eq!(j.type_name.as_deref(), Some("PhysicsPrismaticJoint"));
    assert_eq!(j.relationships["physics:body0"].as_deref(), Some("/cabinet_1"));
    assert_eq!(j.relationships["physics:body1"].as_deref(), Some("/drawer_7"));
    let drawer = read_mesh(doc.prim_at("/drawer_7").unwrap()).unwrap();
    assert_eq!(drawer, s.node_submesh("drawer_7").unwrap().without_face_owner());
}

#[test]
fn single_object_has_no_joints() {
    let doc = build_geometry_focused(&scene("cube"));
    assert_eq!(doc.prims().len(), 1);
    assert!(doc.prim_at("/joints").is_none());
}

#[test]
fn parser_examples() {
    let doc = parse_usda("#usda 1.0\ndef Xform \"a\" {}").unwrap();
    assert_eq!(doc.prims().len(), 1);
    assert_eq!(doc.prims()[0].name, "a");
    let err = parse_usda("#usda 1.0\ndef Xform \"a\"\n{\n    variantSet \"look\" = {\n    }\n}\n").unwrap_err();
    assert!(matches!(&err, UsdError::Unsupported { .. }), "{err}");
    assert_eq!(err.construct(), Some("variantSet"));
}
