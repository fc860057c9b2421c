use std::path::{Path, PathBuf};

use idi_core::content::{verify_item, ContentStore};
use idi_core::format::{load_scene, save_scene, FormatError};
use idi_core::harness::{run_to_dir, EventScript, HarnessError};
use idi_core::ids::{ContentId, JointId, SegmentId, WidgetId};
use idi_core::mesh::{compute_stats, import_mesh_with_report};
use idi_core::physics::{JointAxes, JointSpec};
use idi_core::scene::Violation;
use idi_core::spectral::SegmentParams;
use idi_core::widgets::{KnobMode, Placement};
use idi_core::{Error, ErrorClass, IdiScene};
use nalgebra::{Point3, Vector3};
use serde_json::{json, Value};

use crate::{
    ContentBindArgs, ContentImportArgs, ImportArgs, JointAddArgs, JointRemoveArgs, SceneArg, SegmentArgs, ServeArgs,
    SimulateArgs, SliceArgs, SplitArgs, WidgetAddArgs, WidgetAttachArgs, WidgetHideArgs,
};

pub struct Outcome {
    pub text: String,
    pub json: Value,
}

fn outcome(text: impl Into<String>, json: Value) -> Result<Outcome, CliError> {
    Ok(Outcome { text: text.into(), json })
}

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Violations(Vec<Violation>),
    Io(String),
}

impl<E: Into<Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    pub fn code(&self) -> &str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Violations(_) => "ValidationFailure",
            CliError::Io(_) => "IoError",
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Core(e) => e.to_string(),
            CliError::Violations(v) => format!("{} violation(s)", v.len()),
            CliError::Io(m) => m.clone(),
        }
    }

    pub fn details(&self) -> Vec<String> {
        let list = match self {
            CliError::Violations(v)
            | CliError::Core(Error::Format(FormatError::ValidationFailure(v)))
            | CliError::Core(Error::Harness(HarnessError::InvalidScene(v))) => v,
            _ => return Vec::new(),
        };
        list.iter().map(|v| format!("{} {}: {}", v.code, v.subject, v.message)).collect()
    }

    /// 1 for domain errors, 2 for usage, file and I/O errors.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => match e.class() {
                ErrorClass::Invalid | ErrorClass::NotFound | ErrorClass::Internal => 1,
                ErrorClass::File | ErrorClass::Io => 2,
            },
            CliError::Violations(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

fn load(path: &Path) -> Result<IdiScene, CliError> {
    Ok(load_scene(path)?)
}

fn save(scene: &IdiScene, path: &Path) -> Result<(), CliError> {
    Ok(save_scene(scene, path)?)
}

/// Directory a scene's relative paths (meshes, content) resolve against.
fn scene_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn segment_lines(scene: &IdiScene, ids: &[SegmentId]) -> (String, Value) {
    let mut text = String::new();
    let mut rows = Vec::new();
    for id in ids {
        let seg = scene.segment(id).expect("segment was just created");
        let stats = compute_stats(&seg.mesh);
        text.push_str(&format!(
            "{id}  {:<14} {:>7} triangles  volume {:.6e} m^3\n",
            seg.label.to_string(),
            seg.mesh.triangle_count(),
            stats.volume
        ));
        rows.push(json!({
            "id": id,
            "label": seg.label.to_string(),
            "triangles": seg.mesh.triangle_count(),
            "volume": stats.volume,
            "watertight": stats.watertight,
        }));
    }
    (text, Value::Array(rows))
}

pub fn import(a: ImportArgs) -> Result<Outcome, CliError> {
    let (mesh, dropped) = import_mesh_with_report(&a.mesh, None)?;
    let name = a.name.unwrap_or_else(|| {
        let stem = a.mesh.file_stem().and_then(|s| s.to_str()).unwrap_or("scene");
        stem.to_owned()
    });
    let scene = IdiScene::from_mesh(name, mesh);
    save(&scene, &a.output)?;
    let id = scene.segments[0].id.clone();
    let (rows, json) = segment_lines(&scene, std::slice::from_ref(&id));
    let mut text = format!("wrote {}\n{rows}", a.output.display());
    if dropped > 0 {
        text.push_str(&format!("dropped {dropped} degenerate triangles\n"));
    }
    outcome(text, json!({ "scene": a.output, "segments": json, "dropped": dropped }))
}

pub fn slice(a: SliceArgs) -> Result<Outcome, CliError> {
    let mut scene = load(&a.scene)?;
    let ids = scene.slice_segment(&SegmentId::new(a.segment), &a.plane)?;
    save(&scene, &a.scene)?;
    let (text, json) = segment_lines(&scene, &ids);
    outcome(text, json!({ "segments": json }))
}

pub fn split(a: SplitArgs) -> Result<Outcome, CliError> {
    let mut scene = load(&a.scene)?;
    let ids = scene.split_segment(&SegmentId::new(a.segment))?;
    save(&scene, &a.scene)?;
    let (text, json) = segment_lines(&scene, &ids);
    outcome(text, json!({ "segments": json }))
}

pub fn segment(a: SegmentArgs) -> Result<Outcome, CliError> {
    let mut scene = load(&a.scene)?;
    let target = match a.segment {
        Some(s) => SegmentId::new(s),
        None => match scene.segments.as_slice() {
            [only] => only.id.clone(),
            _ => {
                return Err(CliError::Core(
                    idi_core::spectral::SpectralError::InvalidParameter(format!(
                        "scene has {} segments; pick one with --segment",
                        scene.segments.len()
                    ))
                    .into(),
                ))
            }
        },
    };
    let d = SegmentParams::default();
    let params = SegmentParams {
        delta: a.delta.unwrap_or(d.delta),
        k: if a.auto { None } else { a.k },
        k_max: a.k_max.unwrap_or(d.k_max),
        seed: a.seed.unwrap_or(d.seed),
    };
    let (seg, ids) = scene.segment_spectral(&target, &params)?;
    save(&scene, &a.scene)?;
    let (rows, json) = segment_lines(&scene, &ids);
    let text = format!("k = {} ({:?})\n{rows}", seg.k, seg.method);
    outcome(text, json!({ "k": seg.k, "method": seg.method, "eigenvalues": seg.eigenvalues, "segments": json }))
}

pub fn joint_add(a: JointAddArgs) -> Result<Outcome, CliError> {
    let mut scene = load(&a.scene)?;
    let (base, movable) = (SegmentId::new(a.base), SegmentId::new(a.movable));
    let axes = a.axes.map(|v| JointAxes {
        a: Vector3::new(v[0], v[1], v[2]),
        b: Vector3::new(v[3], v[4], v[5]),
        c: Vector3::new(v[6], v[7], v[8]),
    });
    let anchor = a.anchor.map(|p| Point3::new(p[0], p[1], p[2]));
    let spec = match (anchor, axes) {
        (Some(anchor), Some(axes)) => JointSpec {
            id: JointId::new(""),
            joint_type: a.joint_type,
            base,
            movable,
            anchor,
            axes,
            resistance: a.resistance,
            limits: None,
        },
        (anchor, axes) => {
            let mut spec = scene.joint_from_interface(a.joint_type, &base, &movable, a.resistance)?;
            spec.anchor = anchor.unwrap_or(spec.anchor);
            spec.axes = axes.unwrap_or(spec.axes);
            spec
        }
    };
    let id = scene.attach_joint(spec)?;
    save(&scene, &a.scene)?;
    let j = scene.joint(&id).expect("just attached");
    let p = j.anchor;
    let text = format!(
        "{id}: {} {} -> {} at ({:.4}, {:.4}, {:.4}) resistance {}",
        j.joint_type.name(),
        j.base,
        j.movable,
        p.x,
        p.y,
        p.z,
        j.resistance
    );
    outcome(text, json!({ "joint": j }))
}

pub fn joint_remove(a: JointRemoveArgs) -> Result<Outcome, CliError> {
    let mut scene = load(&a.scene)?;
    let j = scene.remove_joint(&JointId::new(a.joint))?;
    save(&scene, &a.scene)?;
    outcome(format!("removed {}", j.id), json!({ "joint": j }))
}

pub fn widget_add(a: WidgetAddArgs) -> Result<Outcome, CliError> {
    let mut scene = load(&a.scene)?;
    let mut placement = Placement::at(a.at.map_or(Vector3::zeros(), |p| Vector3::new(p[0], p[1], p[2])));
    if let Some(s) = a.scale {
        placement.scale = s;
    }
    let id = scene.spawn_widget(a.category, a.subtype, placement)?;
    {
        let w = scene.widget_mut(&id).expect("just spawned");
        w.detents = a.detents;
        w.action = a.action;
        if a.continuous {
            w.mode = KnobMode::Continuous;
        }
        w.check()?;
    }
    if let Some(host) = a.host {
        scene.attach_widget(&id, &SegmentId::new(host))?;
    }
    save(&scene, &a.scene)?;
    let w = scene.widget(&id).expect("just spawned");
    let host = w.host.as_ref().map_or(String::new(), |h| format!(" on {h}"));
    outcome(format!("{id}: {}{host}", w.category), json!({ "widget": w }))
}

pub fn widget_attach(a: WidgetAttachArgs) -> Result<Outcome, CliError> {
    let mut scene = load(&a.scene)?;
    let id = WidgetId::new(a.widget);
    scene.attach_widget(&id, &SegmentId::new(a.segment))?;
    save(&scene, &a.scene)?;
    let w = scene.widget(&id).expect("attached");
    outcome(format!("{id} on {}", w.host.as_ref().expect("attached")), json!({ "widget": w }))
}

pub fn widget_hide(a: WidgetHideArgs) -> Result<Outcome, CliError> {
    let mut scene = load(&a.scene)?;
    let id = WidgetId::new(a.widget);
    scene.set_visibility(&id, a.show)?;
    save(&scene, &a.scene)?;
    let state = if a.show { "visible" } else { "hidden" };
    outcome(format!("{id} {state}"), json!({ "widget": scene.widget(&id) }))
}

pub fn content_import(a: ContentImportArgs) -> Result<Outcome, CliError> {
    let mut scene = load(&a.scene)?;
    let mut store = ContentStore::open(&scene_dir(&a.scene))?;
    let mut item = store.import(&a.file, a.kind)?;
    item.annotation = a.annotation;
    let id = scene.add_content(item.clone());
    save(&scene, &a.scene)?;
    outcome(format!("{id}: {} {} bytes -> {}", item.kind, item.size, item.file), json!({ "item": item }))
}

pub fn content_bind(a: ContentBindArgs) -> Result<Outcome, CliError> {
    let mut scene = load(&a.scene)?;
    let content = ContentId::new(a.content);
    scene.bind_content(&content, a.target.clone(), a.role)?;
    save(&scene, &a.scene)?;
    let binding = json!({ "content": content, "target": a.target, "role": a.role });
    outcome(format!("{content} -> {}", a.target), json!({ "binding": binding }))
}

pub fn simulate(a: SimulateArgs) -> Result<Outcome, CliError> {
    let scene = load(&a.scene)?;
    let script = EventScript::load(&a.script)?;
    let report = run_to_dir(&scene, &script, &a.output)?;
    let rejected = report.events.iter().filter(|e| e.error.is_some()).count();
    let mut text = format!(
        "{} steps, {} effects, {} touch hits -> {}\n",
        report.steps,
        report.effects.len(),
        report.touch_hits.len(),
        a.output.display()
    );
    for e in &report.effects {
        let content = e.content.as_ref().map_or("-".to_string(), |c| c.to_string());
        text.push_str(&format!("  t={:<6} {} {} {content}\n", e.time, e.widget, e.action));
    }
    if rejected > 0 {
        text.push_str(&format!("{rejected} event(s) rejected; see report.json\n"));
    }
    outcome(
        text,
        json!({
            "steps": report.steps,
            "effects": report.effects,
            "events": report.events,
            "output": a.output,
        }),
    )
}

pub fn validate(a: SceneArg) -> Result<Outcome, CliError> {
    let scene = match load_scene(&a.scene) {
        Ok(s) => s,
        Err(FormatError::ValidationFailure(v)) => return Err(CliError::Violations(v)),
        Err(e) => return Err(e.into()),
    };
    let dir = scene_dir(&a.scene);
    let broken: Vec<Violation> = scene
        .content
        .iter()
        .filter_map(|item| verify_item(&dir, item).err().map(|e| (item, e)))
        .map(|(item, e)| Violation {
            code: Error::from(e.clone()).code().into(),
            subject: item.id.to_string(),
            message: e.to_string(),
        })
        .collect();
    if !broken.is_empty() {
        return Err(CliError::Violations(broken));
    }
    let text = format!(
        "ok: {} segments, {} joints, {} widgets, {} content items, {} bindings",
        scene.segments.len(),
        scene.joints.len(),
        scene.widgets.len(),
        scene.content.len(),
        scene.bindings.len()
    );
    outcome(text, json!({ "ok": true }))
}

pub fn serve(a: ServeArgs) -> Result<Outcome, CliError> {
    let (scene, work_dir) = match &a.scene {
        Some(p) => (load(p)?, scene_dir(p)),
        None => (IdiScene::new("untitled"), PathBuf::from(".")),
    };
    let config =
        idi_service::ServiceConfig { port: a.port, work_dir, scene_path: a.scene.clone(), frame_every: a.frame_every };
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Io(e.to_string()))?;
    runtime.block_on(async {
        let (addr, server) = idi_service::bind(config, scene).await.map_err(|e| CliError::Io(e.to_string()))?;
        eprintln!("listening on http://{addr}");
        server.await.map_err(|e| CliError::Io(e.to_string()))
    })?;
    outcome("", Value::Null)
}

pub fn tv_assets(dir: &Path) -> Result<Outcome, CliError> {
    let assets = idi_core::demo::write_tv_assets(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut text = format!("{}\n", assets.mesh.display());
    for v in &assets.videos {
        text.push_str(&format!("{}\n", v.display()));
    }
    text.push_str(&format!("{}\n", assets.script.display()));
    outcome(text, json!({ "mesh": assets.mesh, "videos": assets.videos, "script": assets.script }))
}
