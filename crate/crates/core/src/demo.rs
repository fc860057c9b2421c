//! Bundled fixtures: the two-cube joint preview, a compound pendulum, a
//! damping rig and a small television with a channel knob.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::content::{BindingRole, BindingTarget, ContentKind, ContentStore};
use crate::harness::{EventScript, ScriptEvent};
use crate::ids::{JointId, SegmentId, WidgetId};
use crate::mesh::{shapes, MassProperties, TriMesh};
use crate::physics::{JointAxes, JointLimits, JointSpec, JointType, Resistance, TouchEvent, DENSITY};
use crate::scene::{IdiScene, SimConfig};
use crate::slicer::{CutPlane, Provenance, SegmentLabel};
use crate::widgets::{EffectAction, Placement, WidgetCategory, WidgetEvent, WidgetEventKind};
use crate::Error;

/// Edge length of the preview cubes.
pub const CUBE: f64 = 0.2;
/// Speed of the scripted fingertip in the taxonomy and damping fixtures.
pub const TOUCH_SPEED: f64 = 0.5;

/// A scene with one joint and a script that excites it.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub scene: IdiScene,
    pub script: EventScript,
    pub joint: JointId,
    pub movable: SegmentId,
}

fn two_cube_scene(name: &str) -> (IdiScene, SegmentId, SegmentId) {
    let mut scene = IdiScene::new(name);
    let size = Vector3::repeat(CUBE);
    let base = scene.add_segment(
        SegmentLabel::Whole,
        Provenance::Imported,
        shapes::cuboid(Point3::new(-CUBE / 2.0, 0.0, 0.0), size),
    );
    let movable = scene.add_segment(
        SegmentLabel::Whole,
        Provenance::Imported,
        shapes::cuboid(Point3::new(CUBE / 2.0, 0.0, 0.0), size),
    );
    scene.sim = SimConfig { gravity: Vector3::zeros(), ..SimConfig::default() };
    (scene, base, movable)
}

/// Two 20 cm cubes side by side along +x, joined at their shared face with
/// an inferred frame. Gravity is off.
pub fn two_cubes(joint_type: JointType, resistance: Resistance) -> Result<(IdiScene, JointId, SegmentId), Error> {
    let (mut scene, base, movable) = two_cube_scene(&format!("{}-preview", joint_type.name()));
    let spec = scene.joint_from_interface(joint_type, &base, &movable, resistance)?;
    let joint = scene.attach_joint(spec)?;
    Ok((scene, joint, movable))
}

/// Fingertip that excites an allowed degree of freedom of `joint_type` on
/// the movable cube of [`two_cubes`]. It travels along +z and meets the
/// cube's back face (z = -0.1) 0.04 s after `time`.
pub fn preview_touch(joint_type: JointType, time: f64) -> TouchEvent {
    let half = CUBE / 2.0;
    // Contact point on the back face, relative to the anchor at the origin.
    let (x, y) = match joint_type {
        // Off the x axis so the normal-axis rotation gets a lever arm.
        JointType::Pivot => (0.1, 0.08),
        JointType::BallAndSocket => (0.15, 0.05),
        // Straight through the center of mass: pure translation.
        JointType::Plane => (0.1, 0.0),
        JointType::Hinge | JointType::Condyloid | JointType::Saddle => (0.15, 0.0),
    };
    let velocity = Vector3::new(0.0, 0.0, TOUCH_SPEED);
    TouchEvent::new(time, Point3::new(x, y, -half - 0.03), velocity)
}

/// Ten-second run of one joint type under a single touch.
pub fn taxonomy_fixture(joint_type: JointType) -> Result<Fixture, Error> {
    let (scene, joint, movable) = two_cubes(joint_type, Resistance::Low)?;
    let script = EventScript::new(vec![ScriptEvent::Touch(preview_touch(joint_type, 0.1))], 10.0);
    Ok(Fixture { scene, script, joint, movable })
}

/// Hinge rig for the damping comparison: one touch, then 30 s of free decay.
pub fn dissipation_fixture(resistance: Resistance) -> Result<Fixture, Error> {
    let (mut scene, joint, movable) = two_cubes(JointType::Hinge, resistance)?;
    scene.name = format!("dissipation-{resistance}");
    let script = EventScript::new(vec![ScriptEvent::Touch(preview_touch(JointType::Hinge, 0.1))], 30.0);
    Ok(Fixture { scene, script, joint, movable })
}

/// End of the excitation phase of a script: the latest touch sweep end.
pub fn excitation_end(script: &EventScript) -> f64 {
    script
        .events
        .iter()
        .map(|e| match e {
            ScriptEvent::Touch(t) => t.time + t.duration,
            ScriptEvent::Widget(w) => w.time,
        })
        .fold(0.0, f64::max)
}

/// Parameters the authoring client needs to draw the two-cube preview.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointPreview {
    pub joint_type: JointType,
    pub cube_size: f64,
    pub base_center: Point3<f64>,
    pub movable_center: Point3<f64>,
    pub anchor: Point3<f64>,
    pub axes: JointAxes,
    pub free_rotations: Vec<char>,
    pub free_translations: Vec<char>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limits: Option<JointLimits>,
    pub movable_mass: f64,
    pub touch: TouchEvent,
    pub scene: IdiScene,
}

pub fn joint_preview(joint_type: JointType) -> Result<JointPreview, Error> {
    let (scene, joint, _) = two_cubes(joint_type, Resistance::Low)?;
    let spec = scene.joint(&joint).expect("just attached").clone();
    Ok(JointPreview {
        joint_type,
        cube_size: CUBE,
        base_center: Point3::new(-CUBE / 2.0, 0.0, 0.0),
        movable_center: Point3::new(CUBE / 2.0, 0.0, 0.0),
        anchor: spec.anchor,
        axes: spec.axes,
        free_rotations: joint_type.free_rotations().to_vec(),
        free_translations: joint_type.free_translations().to_vec(),
        limits: spec.effective_limits(),
        movable_mass: CUBE.powi(3) * DENSITY,
        touch: preview_touch(joint_type, 0.1),
        scene,
    })
}

/// Pendulum bob: 0.1 x 0.2 x 0.1 m box hanging below a hinge at the origin.
pub const PENDULUM_SIZE: [f64; 3] = [0.1, 0.2, 0.1];

/// Compound pendulum: a box hinged at the top edge of its long side, swinging
/// about world z under gravity.
pub fn pendulum_fixture(duration: f64) -> Result<Fixture, Error> {
    let [w, h, d] = PENDULUM_SIZE;
    let mut scene = IdiScene::new("pendulum");
    let base = scene.add_segment(
        SegmentLabel::Whole,
        Provenance::Imported,
        shapes::cuboid(Point3::new(0.0, 0.025, 0.0), Vector3::new(w, 0.05, d)),
    );
    let movable = scene.add_segment(
        SegmentLabel::Whole,
        Provenance::Imported,
        shapes::cuboid(Point3::new(0.0, -h / 2.0, 0.0), Vector3::new(w, h, d)),
    );
    let axes = JointAxes::from_normal_and_axis(-Vector3::y(), Vector3::z()).expect("orthogonal");
    let joint = scene.attach_joint(JointSpec {
        id: JointId::new(""),
        joint_type: JointType::Hinge,
        base,
        movable: movable.clone(),
        anchor: Point3::origin(),
        axes,
        resistance: Resistance::Low,
        limits: None,
    })?;
    // A slow push on the bob's -x face, 15 cm below the hinge: about 5 degrees of swing.
    let touch = TouchEvent::new(0.1, Point3::new(-w / 2.0 - 0.02, -0.15, 0.0), Vector3::new(0.1, 0.0, 0.0));
    let script = EventScript::new(vec![ScriptEvent::Touch(touch)], duration);
    Ok(Fixture { scene, script, joint, movable })
}

/// Small-angle period of the pendulum bob about its hinge, from the
/// parallel-axis theorem.
pub fn pendulum_analytic_period(gravity: f64) -> f64 {
    let [w, h, d] = PENDULUM_SIZE;
    let mass = w * h * d * DENSITY;
    let i_com = mass * (w * w + h * h) / 12.0;
    let lever = h / 2.0;
    let i_pivot = i_com + mass * lever * lever;
    2.0 * PI * (i_pivot / (mass * gravity * lever)).sqrt()
}

/// Mean period from upward zero crossings of a sampled angle signal.
pub fn measured_period(times: &[f64], angles: &[f64]) -> Option<f64> {
    let mut crossings = Vec::new();
    for i in 1..angles.len().min(times.len()) {
        let (a0, a1) = (angles[i - 1], angles[i]);
        if a0 < 0.0 && a1 >= 0.0 {
            let f = -a0 / (a1 - a0);
            crossings.push(times[i - 1] + f * (times[i] - times[i - 1]));
        }
    }
    if crossings.len() < 2 {
        return None;
    }
    Some((crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64)
}

/// Television grid: a 60 x 45 x 40 cm cabinet with a 6 x 6 x 4 cm channel
/// knob on its front face (+z).
const TV_XS: [f64; 4] = [-0.3, 0.18, 0.24, 0.3];
const TV_YS: [f64; 4] = [0.0, 0.1, 0.16, 0.45];
const TV_ZS: [f64; 3] = [-0.2, 0.2, 0.24];

pub const TV_KNOB_CENTER: [f64; 3] = [0.21, 0.13, 0.22];
/// Cuts the knob off 1 cm in front of the cabinet face.
pub const TV_KNOB_PLANE: [f64; 6] = [0.21, 0.13, 0.21, 0.0, 0.0, 1.0];
pub const TV_SCREEN_AT: [f64; 3] = [-0.06, 0.28, 0.2];
pub const TV_BUTTON_AT: [f64; 3] = [0.21, 0.05, 0.2];
pub const TV_CHANNELS: usize = 3;

pub fn tv_mesh() -> TriMesh {
    let mut cells: Vec<[usize; 3]> = Vec::new();
    for i in 0..3 {
        for j in 0..3 {
            cells.push([i, j, 0]);
        }
    }
    cells.push([1, 1, 1]);
    shapes::blocks(&TV_XS, &TV_YS, &TV_ZS, &cells)
}

pub fn tv_knob_plane() -> CutPlane {
    let p = TV_KNOB_PLANE;
    CutPlane::new(Point3::new(p[0], p[1], p[2]), Vector3::new(p[3], p[4], p[5])).expect("unit normal")
}

/// Bytes of a tiny MP4 container (an `ftyp` box and a labelled `free` box).
/// Players will not decode it; the pipeline only stores and routes it.
pub fn fake_video(channel: usize) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&24u32.to_be_bytes());
    out.extend_from_slice(b"ftypisom");
    out.extend_from_slice(&0x200u32.to_be_bytes());
    out.extend_from_slice(b"isomiso2");
    let label = format!("channel {channel}");
    out.extend_from_slice(&(8 + label.len() as u32).to_be_bytes());
    out.extend_from_slice(b"free");
    out.extend_from_slice(label.as_bytes());
    out
}

/// Widget ids assigned by [`build_tv_scene`], in creation order.
pub const TV_KNOB: &str = "widget0";
pub const TV_SCREEN: &str = "widget1";
pub const TV_BUTTON: &str = "widget2";

/// Turn the knob one detent, then press the button.
pub fn tv_script() -> EventScript {
    let rotate = WidgetEvent {
        time: 0.5,
        widget: WidgetId::new(TV_KNOB),
        kind: WidgetEventKind::Rotate { angle: 2.0 * PI / TV_CHANNELS as f64 },
    };
    let press = WidgetEvent { time: 1.0, widget: WidgetId::new(TV_BUTTON), kind: WidgetEventKind::Press };
    EventScript::new(vec![ScriptEvent::Widget(rotate), ScriptEvent::Widget(press)], 2.0)
}

/// Effects the TV script must produce: select channel index 1, then play it.
pub fn tv_expected_actions() -> Vec<(EffectAction, String)> {
    vec![(EffectAction::Select, "content1".into()), (EffectAction::Play, "content1".into())]
}

/// Files for the TV walk-through.
#[derive(Debug, Clone)]
pub struct TvAssets {
    pub mesh: PathBuf,
    pub videos: Vec<PathBuf>,
    pub script: PathBuf,
}

/// Writes `tv.obj`, `videos/channel{1,2,3}.mp4` and `tv_script.jsonl`.
pub fn write_tv_assets(dir: &Path) -> std::io::Result<TvAssets> {
    fs::create_dir_all(dir.join("videos"))?;
    let mesh = dir.join("tv.obj");
    fs::write(&mesh, crate::mesh::to_obj_string(&tv_mesh()))?;
    let mut videos = Vec::new();
    for ch in 1..=TV_CHANNELS {
        let p = dir.join("videos").join(format!("channel{ch}.mp4"));
        fs::write(&p, fake_video(ch))?;
        videos.push(p);
    }
    let script = dir.join("tv_script.jsonl");
    fs::write(&script, tv_script().to_jsonl())?;
    Ok(TvAssets { mesh, videos, script })
}

/// Runs the authoring steps on the TV: slice off the knob, pivot it on the
/// cabinet, add knob, screen and power-button widgets and bind the videos
/// scene-wide. Content is imported into `scene_dir/content/`.
pub fn build_tv_scene(assets: &TvAssets, scene_dir: &Path) -> Result<IdiScene, Error> {
    let mesh = crate::mesh::import_mesh(&assets.mesh, None)?;
    let mut scene = IdiScene::from_mesh("tv", mesh);
    let whole = scene.segments[0].id.clone();
    let parts = scene.slice_segment(&whole, &tv_knob_plane())?;
    let (knob, cabinet) = (parts[0].clone(), parts[1].clone());
    let spec = scene.joint_from_interface(JointType::Pivot, &cabinet, &knob, Resistance::Medium)?;
    scene.attach_joint(spec)?;

    let at = |p: [f64; 3]| Placement::at(Vector3::new(p[0], p[1], p[2]));
    let k = scene.spawn_widget(WidgetCategory::Knob, None, at(TV_KNOB_CENTER))?;
    scene.attach_widget(&k, &knob)?;
    let s = scene.spawn_widget(WidgetCategory::Screen, None, at(TV_SCREEN_AT))?;
    scene.attach_widget(&s, &cabinet)?;
    let b = scene.spawn_widget(WidgetCategory::Button, None, at(TV_BUTTON_AT))?;
    scene.attach_widget(&b, &cabinet)?;

    let mut store = ContentStore::open(scene_dir)?;
    for v in &assets.videos {
        let item = store.import(v, Some(ContentKind::Video))?;
        let id = scene.add_content(item);
        scene.bind_content(&id, BindingTarget::Scene, BindingRole::PlaybackSource)?;
    }
    store.save_index()?;
    Ok(scene)
}

/// Mass of a closed mesh at the simulation density.
pub fn mass_of(mesh: &TriMesh) -> f64 {
    MassProperties::from_mesh(mesh, DENSITY).mass
}
