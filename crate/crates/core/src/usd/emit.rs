use std::fmt::Write;

use super::{Attribute, Prim, Specifier, UsdDocument, Value};

const INDENT: &str = "    ";

/// Canonical text for a document.
///
/// Layout: header, layer metadata, then one blank line before every prim
/// except the first item of a prim body. Properties come attributes first,
/// each group sorted by name, then child prims in stored order.
pub fn emit_usda(doc: &UsdDocument) -> String {
    let mut out = String::from("#usda 1.0\n(\n");
    out.push_str("    upAxis = \"Z\"\n");
    out.push_str("    metersPerUnit = 1\n");
    if let Some(d) = &doc.default_prim {
        let _ = writeln!(out, "    defaultPrim = {}", quote_string(d));
    }
    out.push_str(")\n");
    for p in &doc.root.children {
        out.push('\n');
        emit_prim(&mut out, p, 0);
    }
    out
}

fn emit_prim(out: &mut String, p: &Prim, depth: usize) {
    let ind = INDENT.repeat(depth);
    out.push_str(&ind);
    out.push_str(match p.specifier {
        Specifier::Def => "def ",
        Specifier::Over => "over ",
    });
    if let Some(t) = &p.type_name {
        out.push_str(t);
        out.push(' ');
    }
    out.push_str(&quote_string(&p.name));
    if !p.api_schemas.is_empty() || p.references.is_some() {
        out.push_str(" (\n");
        if !p.api_schemas.is_empty() {
            let list: Vec<String> = p.api_schemas.iter().map(|s| quote_string(s)).collect();
            let _ = writeln!(out, "{ind}{INDENT}prepend apiSchemas = [{}]", list.join(", "));
        }
        if let Some(r) = &p.references {
            let _ = writeln!(out, "{ind}{INDENT}prepend references = @{r}@");
        }
        out.push_str(&ind);
        out.push(')');
    }
    out.push('\n');
    out.push_str(&ind);
    out.push_str("{\n");
    let mut first = true;
    for (name, a) in &p.attributes {
        emit_attribute(out, name, a, depth + 1);
        first = false;
    }
    for (name, target) in &p.relationships {
        let _ = write!(out, "{ind}{INDENT}rel {name}");
        if let Some(t) = target {
            let _ = write!(out, " = <{t}>");
        }
        out.push('\n');
        first = false;
    }
    for c in &p.children {
        if !first {
            out.push('\n');
        }
        emit_prim(out, c, depth + 1);
        first = false;
    }
    out.push_str(&ind);
    out.push_str("}\n");
}

fn emit_attribute(out: &mut String, name: &str, a: &Attribute, depth: usize) {
    out.push_str(&INDENT.repeat(depth));
    if a.custom {
        out.push_str("custom ");
    }
    if a.uniform {
        out.push_str("uniform ");
    }
    out.push_str(a.value_type.as_str());
    out.push(' ');
    out.push_str(name);
    if let Some(v) = &a.value {
        out.push_str(" = ");
        emit_value(out, v);
    }
    out.push('\n');
}

fn emit_value(out: &mut String, v: &Value) {
    match v {
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Int(i) => {
            let _ = write!(out, "{i}");
        }
        Value::Real(x) => out.push_str(&format_real(*x)),
        Value::Text(s) => out.push_str(&quote_string(s)),
        Value::Vec2(t) => tuple(out, t),
        Value::Vec3(t) => tuple(out, t),
        Value::Vec4(t) => tuple(out, t),
        Value::Matrix(rows) => {
            out.push_str("( ");
            for (i, r) in rows.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                tuple(out, r);
            }
            out.push_str(" )");
        }
        Value::IntArray(xs) => {
            out.push('[');
            for (i, x) in xs.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                let _ = write!(out, "{x}");
            }
            out.push(']');
        }
        Value::Vec3Array(xs) => {
            out.push('[');
            for (i, x) in xs.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                tuple(out, x);
            }
            out.push(']');
        }
        Value::TextArray(xs) => {
            out.push('[');
            for (i, x) in xs.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(&quote_string(x));
            }
            out.push(']');
        }
    }
}

fn tuple(out: &mut String, xs: &[f64]) {
    out.push('(');
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&format_real(*x));
    }
    out.push(')');
}

/// Shortest text that parses back to the same `f64`. Plain decimal in the
/// usual range, exponent form for very large or very small magnitudes.
pub fn format_real(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let a = x.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

pub fn quote_string(s: &str) -> String {
    let mut q = String::with_capacity(s.len() + 2);
    q.push('"');
    for c in s.chars() {
        match c {
            '"' => q.push_str("\\\""),
            '\\' => q.push_str("\\\\"),
            '\n' => q.push_str("\\n"),
            '\t' => q.push_str("\\t"),
            '\r' => q.push_str("\\r"),
            c => q.push(c),
        }
    }
    q.push('"');
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::usd::ValueType;

    #[test]
    fn empty_document_header() {
        assert_eq!(
            emit_usda(&UsdDocument::new()),
            "#usda 1.0\n(\n    upAxis = \"Z\"\n    metersPerUnit = 1\n)\n"
        );
    }

    #[test]
    fn reals() {
        assert_eq!(format_real(1.0), "1");
        assert_eq!(format_real(0.1), "0.1");
        assert_eq!(format_real(-2.5), "-2.5");
        assert_eq!(format_real(1e-7), "1e-7");
        assert_eq!(format_real(1.5e20), "1.5e20");
        assert_eq!(format_real(f64::NEG_INFINITY), "-inf");
        for x in [0.1 + 0.2, 1.0 / 3.0, 6.02214076e23, -1e-300, 123456.789] {
            assert_eq!(format_real(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn layout() {
        let mut doc = UsdDocument::new();
        let mut a = Prim::new("a", Some("Xform"))
            .with_attr("zeta", Attribute::double(2.0))
            .with_attr("alpha", Attribute::string("x\"y").custom())
            .with_rel("physics:body0", "/b")
            .with_child(Prim::new("c", None));
        a.references = Some("./obj.usda".into());
        doc.root.children.push(a);
        doc.root.children.push(
            Prim::new("b", Some("Mesh")).with_attr(
                "points",
                Attribute::new(ValueType::Point3fArray, Value::Vec3Array(vec![[0.0, 1.0, 2.5]])),
            ),
        );
        let expected = "#usda 1.0
(
    upAxis = \"Z\"
    metersPerUnit = 1
)

def Xform \"a\" (
    prepend references = @./obj.usda@
)
{
    custom string alpha = \"x\\\"y\"
    double zeta = 2
    rel physics:body0 = </b>

    def \"c\"
    {
    }
}

def Mesh \"b\"
{
    point3f[] points = [(0, 1, 2.5)]
}
";
        assert_eq!(emit_usda(&doc), expected);
    }
}
