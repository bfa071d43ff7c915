use thiserror::Error;

use super::{Arg, Call, Literal, ValidatedProgram};
use crate::usd::{is_identifier, is_property_name, Attribute, Prim, UsdDocument, Value, ValueType};

/// Everything the interpreter can do.
pub const OPERATIONS: [&str; 5] = ["define_prim", "add_reference", "set_translate", "set_scale", "set_attribute"];

const TRANSLATE: &str = "xformOp:translate";
const SCALE: &str = "xformOp:scale";
const OP_ORDER: &str = "xformOpOrder";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ApplyError {
    #[error("line {line}: prim {path} already exists")]
    PrimExists { line: usize, path: String },
    #[error("line {line}: no prim at {path}")]
    UnknownPath { line: usize, path: String },
    #[error("line {line}: {message}")]
    TypeMismatch { line: usize, message: String },
    #[error("line {line}: `{callee}` is allowlisted but has no implementation")]
    UnknownOperation { line: usize, callee: String },
}

/// Runs a validated program against a copy of `doc`. On any error the
/// input is left as it was and no partial result escapes.
pub fn apply_script(doc: &UsdDocument, program: &ValidatedProgram) -> Result<UsdDocument, ApplyError> {
    let mut out = doc.clone();
    for call in &program.program.statements {
        let op = program.op(call);
        run(&mut out, &op, call)?;
    }
    out.validate().map_err(|e| ApplyError::TypeMismatch {
        line: program.program.statements.last().map_or(0, |c| c.line),
        message: e.to_string(),
    })?;
    Ok(out)
}

fn run(doc: &mut UsdDocument, op: &str, call: &Call) -> Result<(), ApplyError> {
    let line = call.line;
    let mismatch = |message: String| ApplyError::TypeMismatch { line, message };
    let lits: Vec<&Literal> = call
        .args
        .iter()
        .map(|a| match a {
            Arg::Literal(l) => Ok(l),
            Arg::NonLiteral(s) => Err(mismatch(format!("`{s}` is not a literal"))),
        })
        .collect::<Result<_, _>>()?;
    let arity = |n: usize| {
        if lits.len() == n {
            Ok(())
        } else {
            Err(mismatch(format!("`{op}` takes {n} arguments, got {}", lits.len())))
        }
    };
    let text = |i: usize| match lits.get(i) {
        Some(Literal::Str(s)) => Ok(s.as_str()),
        _ => Err(mismatch(format!("argument {} of `{op}` must be a string", i + 1))),
    };
    match op {
        "define_prim" => {
            arity(2)?;
            let (path, type_name) = (text(0)?, text(1)?);
            if !type_name.is_empty() && !is_identifier(type_name) {
                return Err(mismatch(format!("bad prim type `{type_name}`")));
            }
            if doc.prim_at(path).is_some() {
                return Err(ApplyError::PrimExists {
                    line,
                    path: path.to_string(),
                });
            }
            let segs: Vec<&str> = path.strip_prefix('/').unwrap_or("").split('/').collect();
            if segs.iter().any(|s| !is_identifier(s)) {
                return Err(ApplyError::UnknownPath {
                    line,
                    path: path.to_string(),
                });
            }
            // missing ancestors become typeless prims
            let mut cur = &mut doc.root;
            for (k, seg) in segs.iter().enumerate() {
                if cur.child(seg).is_none() {
                    let t = (k + 1 == segs.len() && !type_name.is_empty()).then_some(type_name);
                    cur.children.push(Prim::new(*seg, t));
                }
                cur = cur.child_mut(seg).expect("just ensured");
            }
        }
        "add_reference" => {
            arity(2)?;
            let asset = text(1)?;
            if asset.is_empty() || asset.contains(['@', '\n']) {
                return Err(mismatch(format!("bad asset path `{asset}`")));
            }
            prim(doc, text(0)?, line)?.references = Some(asset.to_string());
        }
        "set_translate" => {
            arity(2)?;
            let v = match lits[1] {
                Literal::Tuple3(t) => *t,
                _ => return Err(mismatch("translate must be a 3-tuple".into())),
            };
            let p = prim(doc, text(0)?, line)?;
            set_xform_op(p, TRANSLATE, Attribute::double3(v), line)?;
        }
        "set_scale" => {
            arity(2)?;
            let v = match lits[1] {
                Literal::Tuple3(t) => *t,
                Literal::Num(s) => [*s; 3],
                _ => return Err(mismatch("scale must be a number or a 3-tuple".into())),
            };
            let p = prim(doc, text(0)?, line)?;
            set_xform_op(p, SCALE, Attribute::float3(v), line)?;
        }
        "set_attribute" => {
            arity(3)?;
            let name = text(1)?;
            if !is_property_name(name) || name.starts_with("xformOp") {
                return Err(mismatch(format!("`{name}` cannot be set with set_attribute")));
            }
            let attr = match lits[2] {
                Literal::Str(s) => Attribute::string(s.clone()),
                Literal::Num(x) if x.fract() == 0.0 && x.abs() < 9.0e15 => {
                    Attribute::new(ValueType::Int, Value::Int(*x as i64))
                }
                Literal::Num(x) => Attribute::double(*x),
                Literal::Tuple3(t) => Attribute::double3(*t),
            };
            let p = prim(doc, text(0)?, line)?;
            if p.relationships.contains_key(name) {
                return Err(mismatch(format!("`{name}` is a relationship")));
            }
            match p.attributes.get_mut(name) {
                Some(old) if old.value_type != attr.value_type => {
                    return Err(mismatch(format!(
                        "`{name}` is {}, cannot store {}",
                        old.value_type, attr.value_type
                    )));
                }
                Some(old) => old.value = attr.value,
                None => {
                    p.attributes.insert(name.to_string(), attr.custom());
                }
            }
        }
        other => {
            return Err(ApplyError::UnknownOperation {
                line,
                callee: other.to_string(),
            })
        }
    }
    Ok(())
}

fn prim<'a>(doc: &'a mut UsdDocument, path: &str, line: usize) -> Result<&'a mut Prim, ApplyError> {
    match doc.prim_at_mut(path) {
        Some(p) if path != "/" => Ok(p),
        _ => Err(ApplyError::UnknownPath {
            line,
            path: path.to_string(),
        }),
    }
}

fn set_xform_op(p: &mut Prim, op: &str, attr: Attribute, line: usize) -> Result<(), ApplyError> {
    if let Some(old) = p.attributes.get(op) {
        if old.value_type != attr.value_type {
            return Err(ApplyError::TypeMismatch {
                line,
                message: format!("`{op}` is {}", old.value_type),
            });
        }
    }
    let mut order = match p.attributes.get(OP_ORDER) {
        None => Vec::new(),
        Some(Attribute {
            value_type: ValueType::TokenArray,
            value,
            ..
        }) => match value {
            Some(Value::TextArray(xs)) => xs.clone(),
            _ => Vec::new(),
        },
        Some(a) => {
            return Err(ApplyError::TypeMismatch {
                line,
                message: format!("`{OP_ORDER}` is {}", a.value_type),
            })
        }
    };
    if !order.iter().any(|o| o == op) {
        if op == TRANSLATE {
            order.insert(0, op.to_string());
        } else {
            order.push(op.to_string());
        }
    }
    p.attributes.insert(op.to_string(), attr);
    p.attributes.insert(
        OP_ORDER.to_string(),
        Attribute::new(ValueType::TokenArray, Value::TextArray(order)).uniform(),
    );
    Ok(())
}
