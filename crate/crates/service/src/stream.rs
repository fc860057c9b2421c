use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use axum::extract::ws::{Message, Utf8Bytes, WebSocket};
use idi_core::harness::{write_outputs, EventScript, RunReport, Runner};
use idi_core::physics::SimState;
use idi_core::widgets::{screen_source, widget_pose, WidgetCategory};
use idi_core::IdiScene;
use serde::Serialize;
use serde_json::{json, Value};
use tokio::sync::{oneshot, watch};

use crate::error::{ApiError, ApiResult};
use crate::session::AppState;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct Progress {
    pub frames: usize,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub enum RunOutcome {
    Done(Box<RunReport>),
    Failed(ApiError),
}

/// A simulation started by `POST /simulate`. Frames are buffered for the
/// whole run so late subscribers replay from the start.
pub struct RunHandle {
    pub id: u64,
    pub frame_every: u64,
    total_steps: AtomicU64,
    step: AtomicU64,
    frames: Mutex<Vec<Utf8Bytes>>,
    progress: watch::Sender<Progress>,
    outcome: Mutex<Option<RunOutcome>>,
}

/// What `GET /runs/latest` returns.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum RunStatus {
    Running { run: u64, step: u64, total_steps: u64 },
    Done { run: u64, report: Box<RunReport> },
    Failed { run: u64, error: ApiError },
}

impl RunHandle {
    fn new(id: u64, frame_every: u64) -> Self {
        Self {
            id,
            frame_every,
            total_steps: AtomicU64::new(0),
            step: AtomicU64::new(0),
            frames: Mutex::new(Vec::new()),
            progress: watch::Sender::new(Progress::default()),
            outcome: Mutex::new(None),
        }
    }

    pub fn is_done(&self) -> bool {
        self.progress.borrow().done
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps.load(Ordering::Acquire)
    }

    pub fn status(&self) -> RunStatus {
        match self.outcome.lock().expect("outcome lock").clone() {
            None => RunStatus::Running {
                run: self.id,
                step: self.step.load(Ordering::Acquire),
                total_steps: self.total_steps(),
            },
            Some(RunOutcome::Done(report)) => RunStatus::Done { run: self.id, report },
            Some(RunOutcome::Failed(error)) => RunStatus::Failed { run: self.id, error },
        }
    }

    fn push(&self, message: Value) {
        let mut frames = self.frames.lock().expect("frames lock");
        frames.push(Utf8Bytes::from(message.to_string()));
        let n = frames.len();
        self.progress.send_modify(|p| p.frames = n);
    }

    fn finish(&self, outcome: RunOutcome) {
        *self.outcome.lock().expect("outcome lock") = Some(outcome);
        self.progress.send_modify(|p| p.done = true);
    }

    fn frames_from(&self, start: usize) -> Vec<Utf8Bytes> {
        self.frames.lock().expect("frames lock")[start..].to_vec()
    }
}

/// Pose and widget state for one streamed frame.
pub fn frame_message(scene: &IdiScene, state: &SimState, effects: &[idi_core::widgets::Effect]) -> Value {
    let poses: Vec<Value> = state
        .bodies
        .iter()
        .map(|b| {
            let q = b.orientation.quaternion();
            json!({
                "segment": b.segment,
                "position": [b.position.x, b.position.y, b.position.z],
                "orientation": [q.w, q.i, q.j, q.k],
            })
        })
        .collect();
    let media = &state.media;
    let widgets: Vec<Value> = scene
        .widgets
        .iter()
        .map(|w| {
            let (p, q) = widget_pose(scene, state, w);
            let value = match w.category {
                WidgetCategory::Knob => json!(media.knobs.get(&w.id)),
                WidgetCategory::Slider => json!(media.sliders.get(&w.id)),
                WidgetCategory::Button => json!(media.buttons.get(&w.id).copied().unwrap_or(false)),
                WidgetCategory::Screen => json!(screen_source(scene, media, w)),
            };
            let q = q.quaternion();
            json!({
                "id": w.id,
                "visible": w.visible,
                "position": [p.x, p.y, p.z],
                "orientation": [q.w, q.i, q.j, q.k],
                "value": value,
            })
        })
        .collect();
    json!({
        "type": "frame",
        "step": state.step,
        "time": state.time,
        "poses": poses,
        "widgets": widgets,
        "effects": effects,
    })
}

fn drive(
    handle: &RunHandle,
    session: &AppState,
    scene: &IdiScene,
    script: &EventScript,
    ready: oneshot::Sender<ApiResult<()>>,
) {
    let started = Instant::now();
    let mut runner = match Runner::new(scene, script) {
        Ok(r) => r,
        Err(e) => {
            let err = ApiError::from(e);
            handle.finish(RunOutcome::Failed(err.clone()));
            let _ = ready.send(Err(err));
            return;
        }
    };
    handle.total_steps.store(runner.total_steps(), Ordering::Release);
    let _ = ready.send(Ok(()));

    let mut recent = Vec::new();
    let mut frames = 0u64;
    let failed = loop {
        if runner.is_done() {
            break None;
        }
        match runner.step() {
            Ok(effects) => recent.extend(effects),
            Err(e) => break Some(ApiError::from(e)),
        }
        let step = runner.state().step;
        handle.step.store(step, Ordering::Release);
        if step % handle.frame_every == 0 || runner.is_done() {
            handle.push(frame_message(scene, runner.state(), &recent));
            recent.clear();
            frames += 1;
        }
    };
    let outcome = match failed {
        Some(err) => RunOutcome::Failed(err),
        None => match runner.finish() {
            Err(e) => RunOutcome::Failed(e.into()),
            Ok((mut report, trajectory)) => {
                let dir = session.config.work_dir.join("runs").join("latest");
                match write_outputs(&dir, &mut report, &trajectory) {
                    Ok(()) => RunOutcome::Done(Box::new(report)),
                    Err(e) => RunOutcome::Failed(e.into()),
                }
            }
        },
    };
    let summary = match &outcome {
        RunOutcome::Done(r) => json!({
            "type": "summary",
            "run": handle.id,
            "steps": r.steps,
            "frames": frames,
            "effects": r.effects,
            "events": r.events,
            "runtime_s": started.elapsed().as_secs_f64(),
        }),
        RunOutcome::Failed(e) => {
            json!({"type": "summary", "run": handle.id, "frames": frames, "error": e})
        }
    };
    handle.push(summary);
    handle.finish(outcome);
}

/// Starts a run on its own thread. Fails with 409 while another run is in
/// progress and with the harness error if the scene or script is rejected.
pub async fn start_run(
    session: &AppState,
    scene: Arc<IdiScene>,
    script: EventScript,
    frame_every: u64,
) -> ApiResult<Arc<RunHandle>> {
    if frame_every == 0 {
        return Err(ApiError::bad_request("InvalidParameter", "frame_every must be at least 1"));
    }
    let (handle, previous) = {
        let mut slot = session.run.lock().expect("run lock");
        if let Some(h) = slot.as_ref().filter(|h| !h.is_done()) {
            return Err(ApiError::conflict("SimulationRunning", format!("run {} is still in progress", h.id)));
        }
        let id = slot.as_ref().map_or(1, |h| h.id + 1);
        let handle = Arc::new(RunHandle::new(id, frame_every));
        (handle.clone(), slot.replace(handle))
    };
    let (tx, rx) = oneshot::channel();
    let (h, s) = (handle.clone(), session.clone());
    std::thread::Builder::new()
        .name(format!("idi-run-{}", handle.id))
        .spawn(move || drive(&h, &s, &scene, &script, tx))
        .map_err(|e| ApiError::internal(format!("cannot start simulation thread: {e}")))?;
    match rx.await {
        Ok(Ok(())) => Ok(handle),
        Ok(Err(e)) => {
            *session.run.lock().expect("run lock") = previous;
            Err(e)
        }
        Err(_) => Err(ApiError::internal("simulation thread exited before starting")),
    }
}

/// Sends every buffered frame, then follows the run until its summary. A
/// dropped connection ends only this subscriber.
pub async fn follow(mut socket: WebSocket, handle: Arc<RunHandle>) {
    let mut rx = handle.progress.subscribe();
    let mut sent = 0;
    loop {
        let Progress { frames, done } = *rx.borrow_and_update();
        if sent < frames {
            for f in handle.frames_from(sent) {
                if socket.send(Message::Text(f)).await.is_err() {
                    return;
                }
                sent += 1;
            }
            continue;
        }
        if done || rx.changed().await.is_err() {
            break;
        }
    }
    let _ = socket.send(Message::Close(None)).await;
}
