use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{LlmError, LlmRequest, LlmSession, ResponseSchema};
use crate::geometry::SurfaceConstraint;
use crate::usd::{format_real, parse_usda};

/// Extra attempts after an invalid answer.
pub const MAX_REPROMPTS: usize = 2;

pub const SCALE_RANGE: (f64, f64) = (0.01, 100.0);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacementAnswer {
    /// Prim name in the descriptive document.
    pub target_id: String,
    pub surface_constraint: SurfaceConstraint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleAnswer {
    pub scale: f64,
    /// Value the model gave before clamping.
    pub raw: f64,
    pub clamped: bool,
}

/// What the script query tells the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptContext {
    pub scene_usd_path: String,
    pub object_label: String,
    /// Asset path the new prim should reference.
    pub object_path: String,
    /// Prim path to define.
    pub prim_path: String,
    /// Value for the prim's translate op.
    pub position: [f64; 3],
    pub scale: f64,
}

/// Asks which prim the object goes on. The answer must name a prim of
/// `descriptive_usd` and a horizontal or vertical surface; otherwise the
/// model is told why and asked again, up to [`MAX_REPROMPTS`] times.
pub fn query_placement(
    session: &mut LlmSession,
    descriptive_usd: &str,
    object_label: &str,
) -> Result<PlacementAnswer, LlmError> {
    let doc = parse_usda(descriptive_usd)
        .map_err(|e| LlmError::Precondition(format!("descriptive document does not parse: {e}")))?;
    if object_label.trim().is_empty() {
        return Err(LlmError::Precondition("empty object label".into()));
    }
    let names: HashSet<String> = doc.all_prims().into_iter().map(|(_, p)| p.name.clone()).collect();
    let request = session.prompts().placement.render(
        ResponseSchema::PlacementTarget,
        &[("descriptive_usd", descriptive_usd), ("object_label", object_label)],
    );
    ask_until_valid(session, request, |text| {
        let v = extract_json(text)?;
        let target = v["target_id"].as_str().ok_or("missing string field `target_id`")?;
        if !names.contains(target) {
            return Err(format!("`{target}` is not a prim in the scene"));
        }
        let surface = match v["surface"].as_str() {
            Some("horizontal") => SurfaceConstraint::Horizontal,
            Some("vertical") => SurfaceConstraint::Vertical,
            _ => return Err("`surface` must be \"horizontal\" or \"vertical\"".into()),
        };
        Ok(PlacementAnswer {
            target_id: target.to_string(),
            surface_constraint: surface,
        })
    })
}

/// Asks for a uniform scale factor. The reply is clamped into
/// [`SCALE_RANGE`]; a clamp is logged and flagged on the answer.
pub fn query_scale(session: &mut LlmSession, object_label: &str, object_extent: [f64; 3]) -> Result<ScaleAnswer, LlmError> {
    if object_extent.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(LlmError::Precondition(format!("object extent must be positive, got {object_extent:?}")));
    }
    let extent = format!(
        "[{}, {}, {}]",
        format_real(object_extent[0]),
        format_real(object_extent[1]),
        format_real(object_extent[2])
    );
    let request = session.prompts().scale.render(
        ResponseSchema::ScaleFactor,
        &[("object_label", object_label), ("object_extent", &extent)],
    );
    ask_until_valid(session, request, |text| {
        let v = extract_json(text)?;
        let raw = v["scale"].as_f64().ok_or("missing numeric field `scale`")?;
        if !(raw.is_finite() && raw > 0.0) {
            return Err(format!("scale must be a positive number, got {raw}"));
        }
        let scale = raw.clamp(SCALE_RANGE.0, SCALE_RANGE.1);
        let clamped = scale != raw;
        if clamped {
            log::warn!("scale {raw} for `{object_label}` clamped to {scale}");
        }
        Ok(ScaleAnswer { scale, raw, clamped })
    })
}

/// Asks for the insertion script and returns the text untouched; checking it
/// is the guard's job.
pub fn query_script(session: &mut LlmSession, context: &ScriptContext) -> Result<String, LlmError> {
    if context.scene_usd_path.trim().is_empty() {
        return Err(LlmError::Precondition("empty scene path".into()));
    }
    if context.position.iter().any(|x| !x.is_finite()) {
        return Err(LlmError::Precondition("position is not finite".into()));
    }
    if !(context.scale.is_finite() && context.scale > 0.0) {
        return Err(LlmError::Precondition(format!("invalid scale {}", context.scale)));
    }
    let ctx = serde_json::to_string_pretty(context).expect("context serializes");
    let request = session
        .prompts()
        .script
        .render(ResponseSchema::InsertionScript, &[("context", &ctx)]);
    Ok(session.complete(&request)?)
}

fn ask_until_valid<T>(
    session: &mut LlmSession,
    base: LlmRequest,
    mut check: impl FnMut(&str) -> Result<T, String>,
) -> Result<T, LlmError> {
    let mut request = base.clone();
    for attempt in 0..=MAX_REPROMPTS {
        let answer = session.complete(&request)?;
        match check(&answer) {
            Ok(v) => return Ok(v),
            Err(reason) if attempt == MAX_REPROMPTS => {
                return Err(LlmError::InvalidAnswer {
                    attempts: attempt + 1,
                    reason,
                    last_answer: answer,
                });
            }
            Err(reason) => {
                log::info!("reprompting after invalid answer: {reason}");
                request = LlmRequest {
                    user_message: format!(
                        "{}\n\nYour previous answer was rejected: {reason}\nPrevious answer: {answer}\nAnswer again.",
                        base.user_message
                    ),
                    ..base.clone()
                };
            }
        }
    }
    unreachable!("loop returns on the last attempt")
}

/// The outermost `{...}` of a reply, parsed. Tolerates prose or code fences
/// around it.
fn extract_json(text: &str) -> Result<serde_json::Value, String> {
    let (Some(a), Some(b)) = (text.find('{'), text.rfind('}')) else {
        return Err("no JSON object in the answer".into());
    };
    if b < a {
        return Err("no JSON object in the answer".into());
    }
    serde_json::from_str(&text[a..=b]).map_err(|e| format!("answer is not valid JSON: {e}"))
}
