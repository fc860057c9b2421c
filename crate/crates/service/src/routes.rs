use std::path::PathBuf;
use std::str::FromStr;

use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Multipart, Path, State, WebSocketUpgrade};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use idi_core::content::{BindingRole, BindingTarget, ContentBinding, ContentKind};
use idi_core::demo::joint_preview;
use idi_core::format::save_scene;
use idi_core::harness::EventScript;
use idi_core::ids::{JointId, SegmentId, WidgetId};
use idi_core::physics::{JointAxes, JointLimits, JointSpec, JointType, Resistance};
use idi_core::slicer::CutPlane;
use idi_core::spectral::SegmentParams;
use idi_core::widgets::{KnobMode, Placement, ScreenSubtype, WidgetCategory, WidgetError};
use nalgebra::Point3;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{ApiError, ApiResult};
use crate::session::{store, AppState};
use crate::stream::{follow, start_run};
use crate::VERSION_HEADER;

/// JSON body whose parse errors come back as `{"error": "BadRequest", ...}`.
#[derive(FromRequest)]
#[from_request(via(Json), rejection(ApiError))]
pub struct Body<T>(pub T);

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::bad_request("BadRequest", r.body_text())
    }
}

/// Mutation response: the new scene version plus the call's result.
#[derive(Serialize)]
struct Mutated<T: Serialize> {
    version: u64,
    #[serde(flatten)]
    result: T,
}

fn mutated<T: Serialize>(version: u64, result: T) -> Json<Mutated<T>> {
    Json(Mutated { version, result })
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/scene", get(get_scene))
        .route("/slice", post(slice))
        .route("/segment", post(segment))
        .route("/joints", post(add_joint))
        .route("/joints/preview/{type}", get(preview))
        .route("/widgets", post(add_widget))
        .route("/widgets/{id}", patch(patch_widget))
        .route("/content", post(upload_content))
        .route("/bindings", post(bind))
        .route("/undo", post(undo))
        .route("/save", post(save))
        .route("/simulate", post(simulate))
        .route("/simulate/stream", get(stream))
        .route("/runs/latest", get(latest_run))
        .fallback(|| async { ApiError::not_found("UnknownRoute", "no such endpoint") })
        .with_state(state)
}

async fn get_scene(State(s): State<AppState>) -> Response {
    let snap = s.snapshot();
    let mut resp = Json(&*snap.scene).into_response();
    resp.headers_mut().insert(VERSION_HEADER, HeaderValue::from(snap.version));
    resp
}

#[derive(Deserialize)]
struct SliceRequest {
    segment: SegmentId,
    plane: CutPlane,
}

async fn slice(State(s): State<AppState>, Body(req): Body<SliceRequest>) -> ApiResult<Response> {
    let plane = CutPlane::new(req.plane.point, req.plane.normal)?;
    let (version, segments) = s
        .mutate(move |scene, _| {
            let ids = scene.slice_segment(&req.segment, &plane)?;
            Ok(ids.iter().filter_map(|id| scene.segment(id).cloned()).collect::<Vec<_>>())
        })
        .await?;
    Ok(mutated(version, json!({ "segments": segments })).into_response())
}

#[derive(Deserialize)]
struct SegmentRequest {
    segment: Option<SegmentId>,
    delta: Option<f64>,
    k: Option<usize>,
    k_max: Option<usize>,
    seed: Option<u64>,
}

async fn segment(State(s): State<AppState>, Body(req): Body<SegmentRequest>) -> ApiResult<Response> {
    let d = SegmentParams::default();
    let params = SegmentParams {
        delta: req.delta.unwrap_or(d.delta),
        k: req.k,
        k_max: req.k_max.unwrap_or(d.k_max),
        seed: req.seed.unwrap_or(d.seed),
    };
    let (version, (segmentation, ids)) = s
        .mutate(move |scene, _| {
            let target = match req.segment {
                Some(id) => id,
                None if scene.segments.len() == 1 => scene.segments[0].id.clone(),
                None => {
                    return Err(ApiError::bad_request(
                        "InvalidParameter",
                        format!("scene has {} segments; name one with \"segment\"", scene.segments.len()),
                    ))
                }
            };
            Ok(scene.segment_spectral(&target, &params)?)
        })
        .await?;
    Ok(mutated(version, json!({ "segmentation": segmentation, "segments": ids })).into_response())
}

#[derive(Deserialize)]
struct JointRequest {
    #[serde(default)]
    id: Option<JointId>,
    #[serde(rename = "type")]
    joint_type: JointType,
    base: SegmentId,
    movable: SegmentId,
    #[serde(default)]
    resistance: Resistance,
    anchor: Option<Point3<f64>>,
    axes: Option<JointAxes>,
    limits: Option<JointLimits>,
}

/// A full spec is attached as given; without `anchor` or `axes` the frame is
/// inferred from the shared interface and any given field overrides it.
async fn add_joint(State(s): State<AppState>, Body(req): Body<JointRequest>) -> ApiResult<Response> {
    let (version, joint) = s
        .mutate(move |scene, _| {
            let mut spec = match (req.anchor, req.axes) {
                (Some(anchor), Some(axes)) => JointSpec {
                    id: JointId::new(""),
                    joint_type: req.joint_type,
                    base: req.base,
                    movable: req.movable,
                    anchor,
                    axes,
                    resistance: req.resistance,
                    limits: None,
                },
                (anchor, axes) => {
                    let mut spec =
                        scene.joint_from_interface(req.joint_type, &req.base, &req.movable, req.resistance)?;
                    spec.anchor = anchor.unwrap_or(spec.anchor);
                    spec.axes = axes.unwrap_or(spec.axes);
                    spec
                }
            };
            spec.limits = req.limits;
            if let Some(id) = req.id {
                spec.id = id;
            }
            let id = scene.attach_joint(spec)?;
            Ok(scene.joint(&id).cloned().expect("just attached"))
        })
        .await?;
    Ok(mutated(version, json!({ "joint": joint })).into_response())
}

async fn preview(Path(kind): Path<String>) -> ApiResult<Response> {
    let joint_type = JointType::from_str(&kind).map_err(|e| ApiError::not_found("UnknownJointType", e))?;
    Ok(Json(joint_preview(joint_type)?).into_response())
}

#[derive(Deserialize)]
struct WidgetRequest {
    category: WidgetCategory,
    subtype: Option<ScreenSubtype>,
    #[serde(default)]
    placement: Placement,
    host: Option<SegmentId>,
}

async fn add_widget(State(s): State<AppState>, Body(req): Body<WidgetRequest>) -> ApiResult<Response> {
    let (version, widget) = s
        .mutate(move |scene, _| {
            if let Some(host) = &req.host {
                scene.segment(host).ok_or_else(|| WidgetError::UnknownSegment(host.clone()))?;
            }
            let id = scene.spawn_widget(req.category, req.subtype, req.placement)?;
            if let Some(host) = &req.host {
                scene.attach_widget(&id, host)?;
            }
            Ok(scene.widget(&id).cloned().expect("just spawned"))
        })
        .await?;
    Ok(mutated(version, json!({ "widget": widget })).into_response())
}

#[derive(Deserialize)]
struct WidgetPatch {
    visible: Option<bool>,
    /// Attaches the widget to this segment, keeping its world position.
    host: Option<SegmentId>,
    placement: Option<Placement>,
    detents: Option<u32>,
    mode: Option<KnobMode>,
    action: Option<String>,
}

async fn patch_widget(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Body(req): Body<WidgetPatch>,
) -> ApiResult<Response> {
    let id = WidgetId::new(id);
    let (version, widget) = s
        .mutate(move |scene, _| {
            scene.widget(&id).ok_or_else(|| WidgetError::UnknownWidget(id.clone()))?;
            if let Some(host) = &req.host {
                scene.attach_widget(&id, host)?;
            }
            if let Some(v) = req.visible {
                scene.set_visibility(&id, v)?;
            }
            let w = scene.widget_mut(&id).expect("checked above");
            if let Some(p) = req.placement {
                w.placement = p;
            }
            if req.detents.is_some() {
                w.detents = req.detents;
            }
            if let Some(m) = req.mode {
                w.mode = m;
            }
            if req.action.is_some() {
                w.action = req.action;
            }
            w.check()?;
            Ok(w.clone())
        })
        .await?;
    Ok(mutated(version, json!({ "widget": widget })).into_response())
}

/// Multipart upload: a `file` part (its filename picks the kind) and an
/// optional `kind` part.
async fn upload_content(State(s): State<AppState>, mut form: Multipart) -> ApiResult<Response> {
    let bad = |e: axum::extract::multipart::MultipartError| ApiError::bad_request("BadRequest", e.body_text());
    let (mut file, mut kind) = (None, None);
    while let Some(field) = form.next_field().await.map_err(bad)? {
        match field.name() {
            Some("file") => {
                let name = field.file_name().unwrap_or("upload").to_owned();
                file = Some((name, field.bytes().await.map_err(bad)?));
            }
            Some("kind") => {
                let text = field.text().await.map_err(bad)?;
                kind = Some(
                    ContentKind::from_str(&text)
                        .map_err(|e| ApiError::bad_request("InvalidParameter", e.to_string()))?,
                );
            }
            _ => {}
        }
    }
    let (name, bytes) = file.ok_or_else(|| ApiError::bad_request("BadRequest", "missing 'file' part"))?;
    let config = s.config.clone();
    let (version, item) = s
        .mutate(move |scene, slot| {
            let item = store(slot, &config)?.import_named_bytes(&name, &bytes, kind)?;
            scene.add_content(item.clone());
            Ok(item)
        })
        .await?;
    Ok((StatusCode::CREATED, mutated(version, json!({ "item": item }))).into_response())
}

#[derive(Deserialize)]
struct BindRequest {
    content: idi_core::ids::ContentId,
    /// `scene`, `segment:<id>` or `widget:<id>`.
    target: String,
    #[serde(default = "playback")]
    role: String,
}

fn playback() -> String {
    "playback-source".into()
}

async fn bind(State(s): State<AppState>, Body(req): Body<BindRequest>) -> ApiResult<Response> {
    let target = BindingTarget::from_str(&req.target).map_err(|e| ApiError::bad_request("InvalidParameter", e))?;
    let role = BindingRole::from_str(&req.role).map_err(|e| ApiError::bad_request("InvalidParameter", e))?;
    let (version, binding) = s
        .mutate(move |scene, _| {
            scene.bind_content(&req.content, target.clone(), role)?;
            Ok(ContentBinding { content: req.content, target, role })
        })
        .await?;
    Ok(mutated(version, json!({ "binding": binding })).into_response())
}

async fn undo(State(s): State<AppState>) -> ApiResult<Response> {
    let version = s.undo().await?;
    Ok(Json(json!({ "version": version })).into_response())
}

#[derive(Deserialize, Default)]
struct SaveRequest {
    path: Option<PathBuf>,
}

async fn save(State(s): State<AppState>, body: axum::body::Bytes) -> ApiResult<Response> {
    let req: SaveRequest = if body.iter().all(u8::is_ascii_whitespace) {
        SaveRequest::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request("BadRequest", e.to_string()))?
    };
    let path = req
        .path
        .or_else(|| s.config.scene_path.clone())
        .ok_or_else(|| ApiError::bad_request("InvalidParameter", "no scene path configured; pass \"path\""))?;
    let snap = s.snapshot();
    let target = path.clone();
    tokio::task::spawn_blocking(move || save_scene(&snap.scene, &target))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(Json(json!({ "version": s.snapshot().version, "path": path })).into_response())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScriptBody {
    /// JSON-lines text, as in script files.
    Text(String),
    Object(EventScript),
}

#[derive(Deserialize)]
struct SimulateRequest {
    script: ScriptBody,
    frame_every: Option<u64>,
}

async fn simulate(State(s): State<AppState>, Body(req): Body<SimulateRequest>) -> ApiResult<Response> {
    // Objects go through the text parser too, so both forms get the same checks.
    let text = match req.script {
        ScriptBody::Text(t) => t,
        ScriptBody::Object(script) => script.to_jsonl(),
    };
    let script = EventScript::parse(&text)?;
    let snap = s.snapshot();
    let handle = start_run(&s, snap.scene, script, req.frame_every.unwrap_or(s.config.frame_every)).await?;
    let body = json!({
        "run": handle.id,
        "version": snap.version,
        "steps": handle.total_steps(),
        "frame_every": handle.frame_every,
    });
    Ok((StatusCode::ACCEPTED, Json(body)).into_response())
}

fn current_run(s: &AppState) -> ApiResult<std::sync::Arc<crate::RunHandle>> {
    s.run
        .lock()
        .expect("run lock")
        .clone()
        .ok_or_else(|| ApiError::not_found("NoRun", "no simulation has been started"))
}

async fn stream(State(s): State<AppState>, ws: WebSocketUpgrade) -> ApiResult<Response> {
    let handle = current_run(&s)?;
    Ok(ws.on_upgrade(move |socket| follow(socket, handle)))
}

async fn latest_run(State(s): State<AppState>) -> ApiResult<Json<Value>> {
    let status = current_run(&s)?.status();
    Ok(Json(serde_json::to_value(status).map_err(|e| ApiError::internal(e.to_string()))?))
}
