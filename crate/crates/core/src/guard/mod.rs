//! Static checks for model-written insertion scripts and a closed
//! interpreter for the ones that pass.

mod apply;
mod parse;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::config::GuardConfig;
use crate::usd::is_prim_path;

pub use apply::{apply_script, ApplyError, OPERATIONS};
pub use parse::parse_script;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Literal {
    Str(String),
    Num(f64),
    Tuple3([f64; 3]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arg {
    Literal(Literal),
    /// Source text of an argument that is not a literal.
    NonLiteral(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Call {
    pub line: usize,
    pub callee: String,
    pub args: Vec<Arg>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Import {
    pub line: usize,
    pub text: String,
    /// Set only for the plain `import <name>` form.
    pub module: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScriptProgram {
    pub statements: Vec<Call>,
    pub imports: Vec<Import>,
    pub parse_errors: Vec<Violation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationReason {
    NotAllowlisted,
    BadImport,
    NonLiteralArg,
    ParseError,
    PathEscape,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub line: usize,
    pub callee: String,
    pub reason: ViolationReason,
    pub detail: String,
}

impl Violation {
    pub fn new(line: usize, callee: &str, reason: ViolationReason, detail: impl Into<String>) -> Self {
        Self {
            line,
            callee: callee.to_string(),
            reason,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Allowed,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuardReport {
    pub verdict: Verdict,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuardPolicy {
    pub module: String,
    pub allowlist: BTreeSet<String>,
    /// When set, `add_reference` may only name these asset paths.
    pub allowed_assets: Option<BTreeSet<String>>,
}

impl Default for GuardPolicy {
    fn default() -> Self {
        Self::from_config(&GuardConfig::default())
    }
}

impl GuardPolicy {
    pub fn from_config(c: &GuardConfig) -> Self {
        Self {
            module: c.module.clone(),
            allowlist: c.allowlist.iter().cloned().collect(),
            allowed_assets: None,
        }
    }

    pub fn with_allowed_assets<I: IntoIterator<Item = S>, S: Into<String>>(mut self, assets: I) -> Self {
        self.allowed_assets = Some(assets.into_iter().map(Into::into).collect());
        self
    }
}

/// A program that passed [`validate`]. Only [`check`] can build one, so
/// [`apply_script`] never sees a rejected program.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedProgram {
    program: ScriptProgram,
    module: String,
}

impl ValidatedProgram {
    pub fn program(&self) -> &ScriptProgram {
        &self.program
    }

    /// Callee of statement `i` with the module prefix removed.
    fn op(&self, call: &Call) -> String {
        call.callee
            .strip_prefix(&format!("{}.", self.module))
            .unwrap_or(&call.callee)
            .to_string()
    }
}

/// Runs every check and reports all violations, at most one per statement.
/// Per statement the order is: callee not allowlisted, non-literal
/// argument, path escape.
pub fn validate(program: &ScriptProgram, policy: &GuardPolicy) -> GuardReport {
    let mut violations = program.parse_errors.clone();
    for (k, imp) in program.imports.iter().enumerate() {
        if k > 0 {
            violations.push(Violation::new(imp.line, &imp.text, ViolationReason::BadImport, "more than one import"));
        } else if imp.module.as_deref() != Some(policy.module.as_str()) {
            violations.push(Violation::new(
                imp.line,
                &imp.text,
                ViolationReason::BadImport,
                format!("only `import {}` is allowed", policy.module),
            ));
        }
    }
    let imported = program.imports.first().and_then(|i| i.module.as_deref()) == Some(policy.module.as_str());
    for call in &program.statements {
        if let Some(v) = check_call(call, policy, imported) {
            violations.push(v);
        }
    }
    violations.sort_by_key(|v| v.line);
    GuardReport {
        verdict: if violations.is_empty() {
            Verdict::Allowed
        } else {
            Verdict::Rejected
        },
        violations,
    }
}

/// [`validate`] plus the witness on success.
pub fn check(program: ScriptProgram, policy: &GuardPolicy) -> Result<ValidatedProgram, GuardReport> {
    let report = validate(&program, policy);
    match report.verdict {
        Verdict::Allowed => Ok(ValidatedProgram {
            program,
            module: policy.module.clone(),
        }),
        Verdict::Rejected => Err(report),
    }
}

fn check_call(call: &Call, policy: &GuardPolicy, imported: bool) -> Option<Violation> {
    let v = |reason, detail: String| Some(Violation::new(call.line, &call.callee, reason, detail));
    let bare = match call.callee.split_once('.') {
        None => call.callee.as_str(),
        Some((m, rest)) if imported && m == policy.module && !rest.contains('.') => rest,
        Some(_) => return v(ViolationReason::NotAllowlisted, "attribute access outside the sanctioned module".into()),
    };
    if !policy.allowlist.contains(bare) {
        return v(ViolationReason::NotAllowlisted, format!("`{bare}` is not allowlisted"));
    }
    if let Some(Arg::NonLiteral(src)) = call.args.iter().find(|a| matches!(a, Arg::NonLiteral(_))) {
        return v(ViolationReason::NonLiteralArg, format!("`{src}` is not a literal"));
    }
    if let Some(Arg::Literal(Literal::Str(p))) = call.args.first() {
        if OPERATIONS.contains(&bare) && (p == "/" || !is_prim_path(p)) {
            return v(ViolationReason::PathEscape, format!("`{p}` is not an absolute prim path"));
        }
    }
    if bare == "add_reference" {
        if let Some(Arg::Literal(Literal::Str(asset))) = call.args.get(1) {
            if let Err(why) = asset_ok(asset, policy) {
                return v(ViolationReason::PathEscape, why);
            }
        }
    }
    None
}

fn asset_ok(asset: &str, policy: &GuardPolicy) -> Result<(), String> {
    if let Some(allowed) = &policy.allowed_assets {
        return if allowed.contains(asset) {
            Ok(())
        } else {
            Err(format!("asset `{asset}` is not one of the allowed assets"))
        };
    }
    let drive = asset.len() >= 2 && asset.as_bytes()[1] == b':' && asset.as_bytes()[0].is_ascii_alphabetic();
    if asset.is_empty()
        || asset.starts_with(['/', '\\', '~'])
        || drive
        || asset.contains("://")
        || asset.chars().any(|c| c.is_control() || c == '@')
        || asset.split(['/', '\\']).any(|s| s == "..")
    {
        return Err(format!("asset `{asset}` escapes the scene directory"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const CANONICAL: &str = "import usd_core
define_prim(\"/scene/pillow_new\", \"Xform\")
add_reference(\"/scene/pillow_new\", \"objects/pillow.obj\")
set_translate(\"/scene/pillow_new\", (1.0, 2.0, 0.55))
set_scale(\"/scene/pillow_new\", (0.075, 0.075, 0.075))
set_attribute(\"/scene/pillow_new\", \"label\", \"pillow\")
";

    fn reasons(text: &str) -> Vec<ViolationReason> {
        validate(&parse_script(text), &GuardPolicy::default())
            .violations
            .iter()
            .map(|v| v.reason)
            .collect()
    }

    #[test]
    fn canonical_is_allowed() {
        let r = validate(&parse_script(CANONICAL), &GuardPolicy::default());
        assert_eq!(r.verdict, Verdict::Allowed, "{r:?}");
        assert!(r.violations.is_empty());
    }

    #[test]
    fn os_remove() {
        use ViolationReason::*;
        assert_eq!(reasons("import os\nos.remove(...)"), [BadImport, NotAllowlisted]);
    }

    #[test]
    fn delete_prim_and_aliases() {
        use ViolationReason::*;
        assert_eq!(reasons("delete_prim(\"/scene\")"), [NotAllowlisted]);
        assert_eq!(reasons("import usd_core as os\ndefine_prim(\"/a\", \"Xform\")"), [BadImport]);
        assert_eq!(reasons("import pxr\ndefine_prim(\"/a\", \"Xform\")"), [BadImport]);
        assert_eq!(reasons("import usd_core\nimport usd_core"), [BadImport]);
        assert!(reasons("import usd_core\nusd_core.define_prim(\"/a\", \"Xform\")").is_empty());
        assert_eq!(reasons("usd_core.define_prim(\"/a\", \"Xform\")"), [NotAllowlisted]);
        assert_eq!(reasons("import usd_core\nusd_core.os.system(\"ls\")"), [NotAllowlisted]);
    }

    #[test]
    fn escapes() {
        use ViolationReason::*;
        assert_eq!(reasons("define_prim(\"../etc\", \"Xform\")"), [PathEscape]);
        assert_eq!(reasons("set_translate(\"/a/../../b\", (0, 0, 0))"), [PathEscape]);
        assert_eq!(reasons("add_reference(\"/a\", \"../../secret.usda\")"), [PathEscape]);
        assert_eq!(reasons("add_reference(\"/a\", \"/etc/passwd\")"), [PathEscape]);
        assert_eq!(reasons("add_reference(\"/a\", \"C:\\\\x.usd\")"), [PathEscape]);
        assert_eq!(reasons("add_reference(\"/a\", \"http://evil/x.usd\")"), [PathEscape]);
        let policy = GuardPolicy::default().with_allowed_assets(["/data/pillow.obj"]);
        let ok = validate(&parse_script("add_reference(\"/a\", \"/data/pillow.obj\")"), &policy);
        assert_eq!(ok.verdict, Verdict::Allowed);
        let bad = validate(&parse_script("add_reference(\"/a\", \"/data/other.obj\")"), &policy);
        assert_eq!(bad.violations[0].reason, PathEscape);
    }

    #[test]
    fn witness_only_for_allowed() {
        assert!(check(parse_script(CANONICAL), &GuardPolicy::default()).is_ok());
        let err = check(parse_script("set_scale(\"/a\", x)"), &GuardPolicy::default()).unwrap_err();
        assert_eq!(err.violations[0].reason, ViolationReason::NonLiteralArg);
    }

    #[test]
    fn report_json_shape() {
        let r = validate(&parse_script("delete_prim(\"/a\")"), &GuardPolicy::default());
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["verdict"], "rejected");
        assert_eq!(v["violations"][0]["reason"], "not_allowlisted");
        assert_eq!(v["violations"][0]["line"], 1);
        assert_eq!(v["violations"][0]["callee"], "delete_prim");
    }
}
