use std::path::{Path, PathBuf};
use std::time::Duration;

use scanstage::config::{BackendKind, Config};
use scanstage::guard::{parse_script, validate, GuardPolicy, Verdict};
use scanstage::insertion::{run_insertion, InsertionError, InsertionJob, InsertionParams, StageCause};
use scanstage::llm::{HttpBackend, LlmBackend, LlmSession, MockBackend, MockRules, Prompts};
use scanstage::scene::{load_mesh, load_scene, AnnotatedScene};
use scanstage::simprep::{build_sim_bundle, SimParams};
use scanstage::usd::{emit_usda, FlavorKind};
use serde_json::json;

use crate::output::{require_file, write_atomic, Failure, EXIT_REJECTED};
use crate::{Backend, Cli, Command, FlavorArgs, InsertArgs, Kind, SimprepArgs, ValidateArgs};

pub fn run(cli: &Cli) -> Result<u8, Failure> {
    let mut config = match &cli.config {
        Some(p) => {
            require_file(p, "config file")?;
            Config::load(p).map_err(|e| Failure::error("config", e.to_string()))?
        }
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    match &cli.command {
        Command::Flavor(a) => flavor(a),
        Command::Insert(a) => insert(a, &mut config),
        Command::Simprep(a) => simprep(a, &config),
        Command::Validate(a) => validate_script(a, &config),
    }
}

fn scene_error(e: impl std::fmt::Display) -> Failure {
    Failure::error("scene", e.to_string())
}

fn flavor(a: &FlavorArgs) -> Result<u8, Failure> {
    require_file(&a.scene, "scene mesh")?;
    require_file(&a.annotations, "annotations")?;
    let scene = load_scene(&a.scene, &a.annotations).map_err(scene_error)?;
    let kind = match a.kind {
        Kind::Descriptive => FlavorKind::Descriptive,
        Kind::GeometryFocused => FlavorKind::GeometryFocused,
    };
    write_atomic(&a.out, emit_usda(&kind.build(&scene)).as_bytes())?;
    log::info!("wrote {}", a.out.display());
    Ok(0)
}

fn is_mesh(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("obj") || e.eq_ignore_ascii_case("ply"))
}

/// `<annotations stem>.obj|.ply`, then `mesh.obj|.ply`, next to the
/// annotations file.
fn find_mesh(annotations: &Path) -> Result<PathBuf, Failure> {
    let dir = annotations.parent().unwrap_or(Path::new(""));
    let stem = annotations.file_stem().and_then(|s| s.to_str()).unwrap_or("");
    let candidates = [
        dir.join(format!("{stem}.obj")),
        dir.join(format!("{stem}.ply")),
        dir.join("mesh.obj"),
        dir.join("mesh.ply"),
    ];
    candidates.iter().find(|p| p.is_file()).cloned().ok_or_else(|| {
        Failure::input(format!(
            "no scene mesh given and none found next to `{}` (pass --mesh)",
            annotations.display()
        ))
    })
}

fn resolve_scene(scene: &Path, mesh: Option<&PathBuf>, annotations: &Path) -> Result<AnnotatedScene, Failure> {
    require_file(scene, "scene")?;
    require_file(annotations, "annotations")?;
    let mesh = match mesh {
        Some(m) => m.clone(),
        None if is_mesh(scene) => scene.to_path_buf(),
        None => find_mesh(annotations)?,
    };
    require_file(&mesh, "scene mesh")?;
    load_scene(&mesh, annotations).map_err(scene_error)
}

/// Asset path of `object` as seen from the directory of `out`, with `/`
/// separators.
fn asset_path(object: &Path, out: &Path) -> Result<String, Failure> {
    let abs = |p: &Path| std::path::absolute(p).map_err(|e| Failure::input(format!("{}: {e}", p.display())));
    let obj = abs(object)?;
    let out_dir = abs(out)?.parent().map(Path::to_path_buf).unwrap_or_default();
    let rel = pathdiff::diff_paths(&obj, &out_dir).unwrap_or(obj);
    let parts: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
    Ok(parts.join("/"))
}

fn session(config: &Config) -> Result<LlmSession, Failure> {
    let cfg_err = |e: String| Failure::error("config", e);
    let prompts = match &config.prompts_dir {
        Some(d) => Prompts::load_dir(d).map_err(cfg_err)?,
        None => Prompts::builtin(),
    };
    let backend: Box<dyn LlmBackend> = match config.backend {
        BackendKind::Mock => {
            let rules = match &config.mock.rules {
                Some(p) => MockRules::load(p).map_err(cfg_err)?,
                None => MockRules::builtin(),
            };
            let mut m = MockBackend::new(rules);
            if let Some(d) = &config.mock.responses_dir {
                m = m.with_responses_dir(d).map_err(cfg_err)?;
            }
            Box::new(m)
        }
        BackendKind::Http => {
            let h = &config.http;
            if h.endpoint.is_empty() {
                return Err(Failure::error("config", "http backend needs http.endpoint"));
            }
            let key = std::env::var(&h.api_key_env).ok();
            Box::new(HttpBackend::new(&h.endpoint, &h.model, key, Duration::from_secs(h.timeout_secs)))
        }
    };
    let mut s = LlmSession::new(backend, prompts);
    if let Some(t) = &config.transcript {
        s = s.with_transcript_file(t.clone());
    }
    Ok(s)
}

fn insert(a: &InsertArgs, config: &mut Config) -> Result<u8, Failure> {
    require_file(&a.object, "object mesh")?;
    if let Some(b) = a.backend {
        config.backend = match b {
            Backend::Mock => BackendKind::Mock,
            Backend::Http => BackendKind::Http,
        };
    }
    let scene = resolve_scene(&a.scene, a.mesh.as_ref(), &a.annotations)?;
    let scene_usd = std::fs::read_to_string(&a.scene)
        .map_err(|e| Failure::input(format!("{}: {e}", a.scene.display())))?;
    let object_mesh = load_mesh(&a.object).map_err(scene_error)?;
    let job = InsertionJob {
        scene,
        scene_usd,
        scene_usd_path: a.scene.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        object_mesh,
        object_asset: asset_path(&a.object, &a.out)?,
        object_label: a.label.clone(),
        seed: config.seed,
    };
    let mut session = session(config)?;
    let result = run_insertion(&job, &mut session, &InsertionParams::from_config(config));

    if let Some(t) = &a.trace {
        let trace = match &result {
            Ok((_, out)) => json!({
                "ok": true,
                "seed": job.seed,
                "backend": session.backend_name(),
                "outcome": out,
                "attempt_trace": out.placement.attempt_trace,
                "transcript": session.transcript(),
            }),
            Err(e) => json!({
                "ok": false,
                "seed": job.seed,
                "backend": session.backend_name(),
                "error": {"stage": e.stage, "message": e.to_string(), "details": details(e)},
                "attempt_trace": attempts(e),
                "transcript": session.transcript(),
            }),
        };
        let text = serde_json::to_string_pretty(&trace).expect("trace serializes") + "\n";
        write_atomic(t, text.as_bytes())?;
    }

    match result {
        Ok((doc, out)) => {
            write_atomic(&a.out, emit_usda(&doc).as_bytes())?;
            log::info!(
                "inserted {} on {} after {} attempt(s)",
                out.prim_path,
                out.placement.target_id,
                out.placement.attempts
            );
            Ok(0)
        }
        Err(e) => {
            let rejected = matches!(e.cause, StageCause::Guard(_));
            Err(Failure {
                code: if rejected { EXIT_REJECTED } else { crate::output::EXIT_ERROR },
                kind: if rejected { "rejected" } else { "insertion" },
                message: e.to_string(),
                stage: Some(e.stage.to_string()),
                details: details(&e),
            })
        }
    }
}

fn details(e: &InsertionError) -> Option<serde_json::Value> {
    match &e.cause {
        StageCause::Guard(r) => Some(json!(r)),
        _ => None,
    }
}

fn attempts(e: &InsertionError) -> serde_json::Value {
    match &e.cause {
        StageCause::Placement(scanstage::insertion::PlacementError::PlacementExhausted { trace, .. }) => json!(trace),
        _ => json!([]),
    }
}

fn simprep(a: &SimprepArgs, config: &Config) -> Result<u8, Failure> {
    let mut config = config.clone();
    if let Some(r) = a.structural_ratio {
        config.simprep.structural_ratio = r;
    }
    if let Some(r) = a.static_ratio {
        config.simprep.static_ratio = r;
    }
    for (name, r) in [
        ("--structural-ratio", config.simprep.structural_ratio),
        ("--static-ratio", config.simprep.static_ratio),
    ] {
        if !(r > 0.0 && r <= 1.0) {
            return Err(Failure::input(format!("{name} must be in (0, 1], got {r}")));
        }
    }
    let scene = resolve_scene(&a.scene, a.mesh.as_ref(), &a.annotations)?;
    let bundle = build_sim_bundle(&scene, &a.target, &SimParams::from_config(&config))
        .map_err(|e| Failure::error("simprep", e.to_string()))?;
    write_atomic(&a.out_dir.join("scene.usda"), bundle.scene_usda().as_bytes())?;
    write_atomic(&a.out_dir.join("task_config.json"), bundle.task_json().as_bytes())?;
    write_atomic(&a.out_dir.join("report.json"), bundle.report_json().as_bytes())?;
    log::info!("wrote sim bundle to {}", a.out_dir.display());
    Ok(0)
}

fn validate_script(a: &ValidateArgs, config: &Config) -> Result<u8, Failure> {
    require_file(&a.script, "script")?;
    let text = std::fs::read(&a.script).map_err(|e| Failure::input(format!("{}: {e}", a.script.display())))?;
    let text = String::from_utf8(text).map_err(|_| Failure::input("script is not valid UTF-8"))?;
    let mut policy = GuardPolicy::from_config(&config.guard);
    if let Some(p) = &a.allowlist {
        require_file(p, "allowlist")?;
        let list = std::fs::read_to_string(p).map_err(|e| Failure::input(format!("{}: {e}", p.display())))?;
        policy.allowlist = list
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect();
    }
    let report = validate(&parse_script(&text), &policy);
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(match report.verdict {
        Verdict::Allowed => 0,
        Verdict::Rejected => EXIT_REJECTED,
    })
}
