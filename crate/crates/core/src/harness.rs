//! Deterministic headless replay of scripted touches and widget events.
//!
//! Scripts are JSON lines sorted by time:
//!
//! ```text
//! {"event":"touch","time":0.1,"center":[0.15,0,-0.13],"velocity":[0,0,0.5]}
//! {"event":"widget","time":0.5,"widget":"widget0","kind":"rotate","angle":2.094}
//! {"event":"end","time":2.0}
//! ```
//!
//! An event at time `t` is applied at the start of step `floor(t / dt)`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::SegmentId;
use crate::physics::{DofReport, DofTracker, PhysicsError, SimState, TouchEvent, TouchHit};
use crate::scene::{IdiScene, Violation};
use crate::util::write_atomic;
use crate::widgets::{dispatch, Effect, MediaState, WidgetEvent};

/// Quiet time simulated after the last event when a script has no `end` line.
pub const DEFAULT_TAIL: f64 = 1.0;
/// Longest accepted script, simulated seconds.
pub const MAX_DURATION: f64 = 3600.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("script line {line}: {message}")]
    ScriptError { line: usize, message: String },
    #[error("scene failed validation ({} violations)", .0.len())]
    InvalidScene(Vec<Violation>),
    #[error("at step {step}: {source}")]
    StepFailed { step: u64, source: PhysicsError },
    #[error("i/o error: {0}")]
    IoError(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "lowercase")]
pub enum ScriptEvent {
    Touch(TouchEvent),
    Widget(WidgetEvent),
}

impl ScriptEvent {
    pub fn time(&self) -> f64 {
        match self {
            ScriptEvent::Touch(t) => t.time,
            ScriptEvent::Widget(w) => w.time,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            ScriptEvent::Touch(_) => "touch",
            ScriptEvent::Widget(_) => "widget",
        }
    }
}

#[derive(Deserialize)]
#[serde(tag = "event", rename_all = "lowercase")]
enum Line {
    Touch(TouchEvent),
    Widget(WidgetEvent),
    End { time: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventScript {
    pub events: Vec<ScriptEvent>,
    /// Simulated seconds.
    pub duration: f64,
}

impl EventScript {
    pub fn new(events: Vec<ScriptEvent>, duration: f64) -> Self {
        Self { events, duration }
    }

    /// Parses JSON lines. Blank lines are skipped. Without an `end` line the
    /// duration is the last event time (touches: plus their sweep) plus
    /// [`DEFAULT_TAIL`].
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut events = Vec::new();
        let mut end = None;
        let mut last = 0.0f64;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let err = |message: String| HarnessError::ScriptError { line, message };
            if end.is_some() {
                return Err(err("events after the end marker".into()));
            }
            let parsed: Line = serde_json::from_str(raw).map_err(|e| err(e.to_string()))?;
            let time = match &parsed {
                Line::Touch(t) => t.time,
                Line::Widget(w) => w.time,
                Line::End { time } => *time,
            };
            if !(time.is_finite() && time >= 0.0) {
                return Err(err(format!("time must be finite and non-negative, got {time}")));
            }
            if time < last {
                return Err(err(format!("time {time} is earlier than the previous event ({last})")));
            }
            last = time;
            match parsed {
                Line::Touch(t) => events.push(ScriptEvent::Touch(t)),
                Line::Widget(w) => events.push(ScriptEvent::Widget(w)),
                Line::End { time } => end = Some(time),
            }
        }
        let duration = end.unwrap_or_else(|| {
            let reach = events
                .iter()
                .map(|e| match e {
                    ScriptEvent::Touch(t) => t.time + t.duration,
                    ScriptEvent::Widget(w) => w.time,
                })
                .fold(0.0, f64::max);
            reach + DEFAULT_TAIL
        });
        check_duration(duration)?;
        Ok(Self { events, duration })
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::IoError(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// JSON-lines form, ending with an `end` marker.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("script events serialize"));
            out.push('\n');
        }
        let _ = writeln!(out, "{}", serde_json::json!({"event": "end", "time": self.duration}));
        out
    }
}

fn check_duration(duration: f64) -> Result<(), HarnessError> {
    if duration > 0.0 && duration <= MAX_DURATION {
        Ok(())
    } else {
        Err(HarnessError::ScriptError {
            line: 0,
            message: format!("script duration must lie in (0, {MAX_DURATION}] s, got {duration}"),
        })
    }
}

/// Step count for a duration: exact when `duration / dt` is an integer
/// (up to rounding), otherwise rounded up.
pub fn step_count(duration: f64, dt: f64) -> u64 {
    let x = duration / dt;
    let r = x.round();
    if (x - r).abs() <= 1e-6 * r.max(1.0) {
        r as u64
    } else {
        x.ceil() as u64
    }
}

/// Step whose start time is the latest one not after `time`.
pub fn event_step(time: f64, dt: f64) -> u64 {
    (time / dt + 1e-9).floor().max(0.0) as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventOutcome {
    /// Widget event that produced effects.
    Effect,
    /// Touch queued for the physics step.
    Touch,
    Rejected,
}

/// What became of one script event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub index: usize,
    pub time: f64,
    pub step: u64,
    pub event: String,
    pub outcome: EventOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub step: u64,
    pub time: f64,
    pub kinetic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scene: String,
    pub steps: u64,
    pub dt: f64,
    pub duration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<PathBuf>,
    pub effects: Vec<Effect>,
    pub events: Vec<EventRecord>,
    pub touch_hits: Vec<TouchHit>,
    pub dof: Vec<DofReport>,
    pub energy: Vec<EnergySample>,
    pub media: MediaState,
    pub runtime_s: f64,
}

pub const TRAJECTORY_HEADER: &str = "step,time,segment,px,py,pz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz";

/// Appends one CSV row per body. Floats use shortest round-trip formatting.
pub fn trajectory_rows(state: &SimState, out: &mut String) {
    for b in &state.bodies {
        let q = b.orientation.quaternion();
        let (p, v, w) = (b.position, b.linear_velocity, b.angular_velocity);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            state.step, state.time, b.segment, p.x, p.y, p.z, q.w, q.i, q.j, q.k, v.x, v.y, v.z, w.x, w.y, w.z
        );
    }
}

/// A run in progress. [`Runner::step`] advances one fixed step so callers
/// (the streaming service) can observe intermediate states.
pub struct Runner<'a> {
    scene: &'a IdiScene,
    script: &'a EventScript,
    state: SimState,
    steps: u64,
    next_event: usize,
    trackers: Vec<DofTracker>,
    effects: Vec<Effect>,
    events: Vec<EventRecord>,
    energy: Vec<EnergySample>,
    trajectory: String,
    started: Instant,
}

impl<'a> Runner<'a> {
    pub fn new(scene: &'a IdiScene, script: &'a EventScript) -> Result<Self, HarnessError> {
        let violations = scene.validate();
        if !violations.is_empty() {
            return Err(HarnessError::InvalidScene(violations));
        }
        check_duration(script.duration)?;
        let state = SimState::new(scene);
        let trackers = scene
            .joints
            .iter()
            .map(|j| DofTracker::new(scene, &state, &j.id))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|source| HarnessError::StepFailed { step: 0, source })?;
        let mut trajectory = String::new();
        trajectory.push_str(TRAJECTORY_HEADER);
        trajectory.push('\n');
        trajectory_rows(&state, &mut trajectory);
        let energy = vec![EnergySample { step: 0, time: 0.0, kinetic: state.kinetic_energy() }];
        let mut runner = Self {
            scene,
            script,
            steps: step_count(script.duration, scene.sim.dt),
            state,
            next_event: 0,
            trackers,
            effects: Vec::new(),
            events: Vec::new(),
            energy,
            trajectory,
            started: Instant::now(),
        };
        for t in runner.trackers.iter_mut() {
            t.observe(&runner.state);
        }
        Ok(runner)
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn total_steps(&self) -> u64 {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.state.step >= self.steps
    }

    pub fn effects(&self) -> &[Effect] {
        &self.effects
    }

    /// Injects the events due at the current step, then advances physics.
    /// Returns the effects produced by this step's widget events.
    pub fn step(&mut self) -> Result<Vec<Effect>, HarnessError> {
        let dt = self.scene.sim.dt;
        let current = self.state.step;
        let mut produced = Vec::new();
        while let Some(ev) = self.script.events.get(self.next_event) {
            let due = event_step(ev.time(), dt);
            if due > current {
                break;
            }
            let index = self.next_event;
            self.next_event += 1;
            let mut record = EventRecord {
                index,
                time: ev.time(),
                step: current,
                event: ev.kind().into(),
                outcome: EventOutcome::Rejected,
                error: None,
                detail: None,
            };
            match ev {
                ScriptEvent::Widget(w) => match dispatch(self.scene, &mut self.state.media, w) {
                    Ok(effects) => {
                        record.outcome = EventOutcome::Effect;
                        produced.extend(effects);
                    }
                    Err(e) => {
                        record.error = Some(crate::error::widget_code(&e).into());
                        record.detail = Some(e.to_string());
                    }
                },
                ScriptEvent::Touch(t) => match self.state.add_touch(index, t.clone()) {
                    Ok(()) => record.outcome = EventOutcome::Touch,
                    Err(e) => {
                        record.error = Some(crate::error::physics_code(&e).into());
                        record.detail = Some(e.to_string());
                    }
                },
            }
            self.events.push(record);
        }
        self.state.advance(self.scene, dt).map_err(|source| HarnessError::StepFailed { step: current, source })?;
        trajectory_rows(&self.state, &mut self.trajectory);
        self.energy.push(EnergySample {
            step: self.state.step,
            time: self.state.time,
            kinetic: self.state.kinetic_energy(),
        });
        for t in self.trackers.iter_mut() {
            t.observe(&self.state);
        }
        self.effects.extend(produced.iter().cloned());
        Ok(produced)
    }

    /// Runs the remaining steps and closes the report. Events timed at or
    /// after the end are recorded as rejected.
    pub fn finish(mut self) -> Result<(RunReport, String), HarnessError> {
        while !self.is_done() {
            self.step()?;
        }
        let current = self.state.step;
        while let Some(ev) = self.script.events.get(self.next_event) {
            self.events.push(EventRecord {
                index: self.next_event,
                time: ev.time(),
                step: current,
                event: ev.kind().into(),
                outcome: EventOutcome::Rejected,
                error: Some("AfterEnd".into()),
                detail: Some(format!(
                    "event at {} s is past the {} s script duration",
                    ev.time(),
                    self.script.duration
                )),
            });
            self.next_event += 1;
        }
        let report = RunReport {
            scene: self.scene.name.clone(),
            steps: self.state.step,
            dt: self.scene.sim.dt,
            duration: self.script.duration,
            trajectory: None,
            effects: self.effects,
            events: self.events,
            touch_hits: self.state.touch_hits.clone(),
            dof: self.trackers.into_iter().map(DofTracker::into_report).collect(),
            energy: self.energy,
            media: self.state.media.clone(),
            runtime_s: self.started.elapsed().as_secs_f64(),
        };
        Ok((report, self.trajectory))
    }
}

/// Runs a script to the end in memory. Returns the report and trajectory CSV.
pub fn run(scene: &IdiScene, script: &EventScript) -> Result<(RunReport, String), HarnessError> {
    Runner::new(scene, script)?.finish()
}

/// Effects as JSON lines.
pub fn effects_jsonl(effects: &[Effect]) -> String {
    let mut out = String::new();
    for e in effects {
        out.push_str(&serde_json::to_string(e).expect("effects serialize"));
        out.push('\n');
    }
    out
}

/// Writes `trajectory.csv`, `effects.jsonl` and `report.json` into `dir`.
pub fn write_outputs(dir: &Path, report: &mut RunReport, trajectory: &str) -> Result<(), HarnessError> {
    let io = |e: std::io::Error| HarnessError::IoError(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    let traj = dir.join("trajectory.csv");
    write_atomic(&traj, trajectory.as_bytes()).map_err(io)?;
    write_atomic(&dir.join("effects.jsonl"), effects_jsonl(&report.effects).as_bytes()).map_err(io)?;
    report.trajectory = Some(PathBuf::from("trajectory.csv"));
    let mut json = serde_json::to_vec_pretty(report).map_err(|e| HarnessError::IoError(e.to_string()))?;
    json.push(b'\n');
    write_atomic(&dir.join("report.json"), &json).map_err(io)?;
    Ok(())
}

/// Runs and writes outputs to `dir`.
pub fn run_to_dir(scene: &IdiScene, script: &EventScript, dir: &Path) -> Result<RunReport, HarnessError> {
    let (mut report, trajectory) = run(scene, script)?;
    write_outputs(dir, &mut report, &trajectory)?;
    Ok(report)
}

/// Rotation angle of a body about a unit `axis`, from its orientation.
pub fn angle_about(state: &SimState, segment: &SegmentId, axis: &nalgebra::Vector3<f64>) -> Option<f64> {
    let q = state.body(segment)?.orientation;
    let v = q.quaternion().imag();
    Some(2.0 * v.dot(axis).atan2(q.quaternion().w))
}
