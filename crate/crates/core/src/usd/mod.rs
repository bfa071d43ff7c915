//! Text USD (USDA) subset: document model, parser, canonical emitter and the
//! two scene flavors.
//!
//! Supported: `def`/`over` prims with an optional type, prim metadata
//! `apiSchemas` and a single `references` asset, typed attributes (optionally
//! `custom`/`uniform`) and single-target relationships. Everything else that
//! USD allows (variants, payloads, inherits, time samples, connections, ...)
//! is rejected with [`UsdError::Unsupported`].

mod emit;
mod flavor;
mod parse;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub use emit::{emit_usda, format_real, quote_string};
pub use flavor::{
    build_descriptive, build_geometry_focused, joint_prim, mesh_prim, prim_names, read_mesh, FlavorKind, JOINTS_SCOPE,
};
pub use parse::parse_usda;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UsdError {
    #[error("{line}:{column}: {message}")]
    Lex { line: usize, column: usize, message: String },
    #[error("{line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{line}:{column}: unsupported construct `{construct}`")]
    Unsupported { line: usize, column: usize, construct: String },
    #[error("invalid document: {0}")]
    Invalid(String),
}

impl UsdError {
    /// Name of the rejected construct, for [`UsdError::Unsupported`].
    pub fn construct(&self) -> Option<&str> {
        match self {
            UsdError::Unsupported { construct, .. } => Some(construct),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValueType {
    Bool,
    Int,
    Float,
    Double,
    String,
    Token,
    Float3,
    Double2,
    Double3,
    Quatf,
    Matrix4d,
    IntArray,
    Float3Array,
    Point3fArray,
    TokenArray,
}

impl ValueType {
    pub const ALL: [ValueType; 15] = [
        ValueType::Bool,
        ValueType::Int,
        ValueType::Float,
        ValueType::Double,
        ValueType::String,
        ValueType::Token,
        ValueType::Float3,
        ValueType::Double2,
        ValueType::Double3,
        ValueType::Quatf,
        ValueType::Matrix4d,
        ValueType::IntArray,
        ValueType::Float3Array,
        ValueType::Point3fArray,
        ValueType::TokenArray,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ValueType::Bool => "bool",
            ValueType::Int => "int",
            ValueType::Float => "float",
            ValueType::Double => "double",
            ValueType::String => "string",
            ValueType::Token => "token",
            ValueType::Float3 => "float3",
            ValueType::Double2 => "double2",
            ValueType::Double3 => "double3",
            ValueType::Quatf => "quatf",
            ValueType::Matrix4d => "matrix4d",
            ValueType::IntArray => "int[]",
            ValueType::Float3Array => "float3[]",
            ValueType::Point3fArray => "point3f[]",
            ValueType::TokenArray => "token[]",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == name)
    }

    /// True if `value` has the shape this type requires.
    pub fn accepts(self, value: &Value) -> bool {
        matches!(
            (self, value),
            (ValueType::Bool, Value::Bool(_))
                | (ValueType::Int, Value::Int(_))
                | (ValueType::Float | ValueType::Double, Value::Real(_))
                | (ValueType::String | ValueType::Token, Value::Text(_))
                | (ValueType::Double2, Value::Vec2(_))
                | (ValueType::Float3 | ValueType::Double3, Value::Vec3(_))
                | (ValueType::Quatf, Value::Vec4(_))
                | (ValueType::Matrix4d, Value::Matrix(_))
                | (ValueType::IntArray, Value::IntArray(_))
                | (ValueType::Float3Array | ValueType::Point3fArray, Value::Vec3Array(_))
                | (ValueType::TokenArray, Value::TextArray(_))
        )
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Attribute payload. Reals are kept as `f64` for every precision so text
/// round-trips exactly.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Real(f64),
    Text(String),
    Vec2([f64; 2]),
    Vec3([f64; 3]),
    Vec4([f64; 4]),
    Matrix([[f64; 4]; 4]),
    IntArray(Vec<i64>),
    Vec3Array(Vec<[f64; 3]>),
    TextArray(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attribute {
    pub value_type: ValueType,
    pub value: Option<Value>,
    pub custom: bool,
    pub uniform: bool,
}

impl Attribute {
    /// Panics if `value` does not fit `value_type`.
    pub fn new(value_type: ValueType, value: Value) -> Self {
        assert!(value_type.accepts(&value), "{value:?} is not a {value_type}");
        Self {
            value_type,
            value: Some(value),
            custom: false,
            uniform: false,
        }
    }

    pub fn declared(value_type: ValueType) -> Self {
        Self {
            value_type,
            value: None,
            custom: false,
            uniform: false,
        }
    }

    pub fn custom(mut self) -> Self {
        self.custom = true;
        self
    }

    pub fn uniform(mut self) -> Self {
        self.uniform = true;
        self
    }

    pub fn string(s: impl Into<String>) -> Self {
        Self::new(ValueType::String, Value::Text(s.into()))
    }

    pub fn token(s: impl Into<String>) -> Self {
        Self::new(ValueType::Token, Value::Text(s.into()))
    }

    pub fn double(x: f64) -> Self {
        Self::new(ValueType::Double, Value::Real(x))
    }

    pub fn float(x: f64) -> Self {
        Self::new(ValueType::Float, Value::Real(x))
    }

    pub fn double3(v: [f64; 3]) -> Self {
        Self::new(ValueType::Double3, Value::Vec3(v))
    }

    pub fn float3(v: [f64; 3]) -> Self {
        Self::new(ValueType::Float3, Value::Vec3(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Specifier {
    #[default]
    Def,
    Over,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Prim {
    pub specifier: Specifier,
    pub name: String,
    pub type_name: Option<String>,
    pub api_schemas: Vec<String>,
    pub references: Option<String>,
    pub attributes: BTreeMap<String, Attribute>,
    /// Relationship name to its target path, `None` when declared without one.
    pub relationships: BTreeMap<String, Option<String>>,
    pub children: Vec<Prim>,
}

impl Prim {
    pub fn new(name: impl Into<String>, type_name: Option<&str>) -> Self {
        Self {
            name: name.into(),
            type_name: type_name.map(str::to_string),
            ..Self::default()
        }
    }

    pub fn with_attr(mut self, name: &str, attr: Attribute) -> Self {
        self.attributes.insert(name.to_string(), attr);
        self
    }

    pub fn with_rel(mut self, name: &str, target: &str) -> Self {
        self.relationships.insert(name.to_string(), Some(target.to_string()));
        self
    }

    pub fn with_child(mut self, child: Prim) -> Self {
        self.children.push(child);
        self
    }

    pub fn child(&self, name: &str) -> Option<&Prim> {
        self.children.iter().find(|c| c.name == name)
    }

    pub fn child_mut(&mut self, name: &str) -> Option<&mut Prim> {
        self.children.iter_mut().find(|c| c.name == name)
    }

    pub fn attr(&self, name: &str) -> Option<&Value> {
        self.attributes.get(name).and_then(|a| a.value.as_ref())
    }

    /// Depth-first, pre-order walk yielding each descendant with its path
    /// (`prefix` is this prim's path).
    pub fn walk<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Prim)>) {
        for c in &self.children {
            let path = if prefix == "/" {
                format!("/{}", c.name)
            } else {
                format!("{prefix}/{}", c.name)
            };
            out.push((path.clone(), c));
            c.walk(&path, out);
        }
    }

    fn check(&self, path: &str) -> Result<(), UsdError> {
        if !is_identifier(&self.name) {
            return Err(UsdError::Invalid(format!("{path}: bad prim name `{}`", self.name)));
        }
        if let Some(t) = &self.type_name {
            if !is_identifier(t) {
                return Err(UsdError::Invalid(format!("{path}: bad type name `{t}`")));
            }
        }
        if let Some(r) = &self.references {
            if r.is_empty() || r.contains(['@', '\n']) {
                return Err(UsdError::Invalid(format!("{path}: bad asset path `{r}`")));
            }
        }
        for s in &self.api_schemas {
            if !is_identifier(s) {
                return Err(UsdError::Invalid(format!("{path}: bad api schema `{s}`")));
            }
        }
        for (name, a) in &self.attributes {
            if !is_property_name(name) {
                return Err(UsdError::Invalid(format!("{path}: bad attribute name `{name}`")));
            }
            if let Some(v) = &a.value {
                if !a.value_type.accepts(v) {
                    return Err(UsdError::Invalid(format!(
                        "{path}.{name}: value does not match type {}",
                        a.value_type
                    )));
                }
            }
        }
        for (name, target) in &self.relationships {
            if !is_property_name(name) || self.attributes.contains_key(name) {
                return Err(UsdError::Invalid(format!("{path}: bad relationship `{name}`")));
            }
            if let Some(t) = target {
                if !is_prim_path(t) {
                    return Err(UsdError::Invalid(format!("{path}.{name}: bad target `{t}`")));
                }
            }
        }
        let mut seen = std::collections::HashSet::new();
        for c in &self.children {
            if !seen.insert(c.name.as_str()) {
                return Err(UsdError::Invalid(format!("{path}: duplicate child `{}`", c.name)));
            }
            c.check(&join_path(path, &c.name))?;
        }
        Ok(())
    }
}

/// A layer. `upAxis` is always `"Z"` and `metersPerUnit` always 1, so only
/// `defaultPrim` is stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UsdDocument {
    /// Pseudo-root: unnamed, no properties; its children are the top-level prims.
    pub root: Prim,
    pub default_prim: Option<String>,
}

impl UsdDocument {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn prims(&self) -> &[Prim] {
        &self.root.children
    }

    pub fn prim_at(&self, path: &str) -> Option<&Prim> {
        let mut cur = &self.root;
        for seg in split_path(path)? {
            cur = cur.child(seg)?;
        }
        Some(cur)
    }

    pub fn prim_at_mut(&mut self, path: &str) -> Option<&mut Prim> {
        let mut cur = &mut self.root;
        for seg in split_path(path)? {
            cur = cur.child_mut(seg)?;
        }
        Some(cur)
    }

    /// Every prim with its absolute path, depth-first pre-order.
    pub fn all_prims(&self) -> Vec<(String, &Prim)> {
        let mut out = Vec::new();
        self.root.walk("/", &mut out);
        out
    }

    /// Checks names, types and sibling uniqueness.
    pub fn validate(&self) -> Result<(), UsdError> {
        let r = &self.root;
        if !r.name.is_empty()
            || r.type_name.is_some()
            || !r.attributes.is_empty()
            || !r.relationships.is_empty()
            || r.references.is_some()
            || !r.api_schemas.is_empty()
        {
            return Err(UsdError::Invalid("pseudo-root carries data".into()));
        }
        if let Some(d) = &self.default_prim {
            if !is_identifier(d) {
                return Err(UsdError::Invalid(format!("bad defaultPrim `{d}`")));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for c in &r.children {
            if !seen.insert(c.name.as_str()) {
                return Err(UsdError::Invalid(format!("duplicate top-level prim `{}`", c.name)));
            }
            c.check(&join_path("/", &c.name))?;
        }
        Ok(())
    }
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Namespaced property name such as `physics:lowerLimit`.
pub fn is_property_name(s: &str) -> bool {
    !s.is_empty() && s.split(':').all(is_identifier)
}

/// Absolute prim path such as `/a/b`; `/` alone is the pseudo-root.
pub fn is_prim_path(s: &str) -> bool {
    split_path(s).is_some()
}

fn split_path(path: &str) -> Option<Vec<&str>> {
    let rest = path.strip_prefix('/')?;
    if rest.is_empty() {
        return Some(Vec::new());
    }
    let segs: Vec<&str> = rest.split('/').collect();
    segs.iter().all(|s| is_identifier(s)).then_some(segs)
}

pub fn join_path(parent: &str, name: &str) -> String {
    if parent == "/" {
        format!("/{name}")
    } else {
        format!("{parent}/{name}")
    }
}
