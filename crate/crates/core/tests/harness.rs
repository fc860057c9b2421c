use std::fs;

use idi_core::demo;
use idi_core::format::{load_scene, save_scene};
use idi_core::harness::{self, EventOutcome, EventScript, HarnessError, ScriptEvent, TRAJECTORY_HEADER};
use idi_core::ids::WidgetId;
use idi_core::physics::JointType;
use idi_core::widgets::{EffectAction, WidgetEvent, WidgetEventKind};

fn tv_scene(dir: &std::path::Path) -> idi_core::IdiScene {
    let assets = demo::write_tv_assets(&dir.join("assets")).unwrap();
    demo::build_tv_scene(&assets, dir).unwrap()
}

#[test]
fn tv_walkthrough_selects_then_plays_the_second_channel() {
    let dir = tempfile::tempdir().unwrap();
    let scene = tv_scene(dir.path());
    assert!(scene.validate().is_empty(), "{:?}", scene.validate());
    assert_eq!(scene.segments.len(), 2);
    assert_eq!(scene.joints[0].joint_type, JointType::Pivot);
    assert_eq!(scene.content.len(), 3);

    let report = harness::run_to_dir(&scene, &demo::tv_script(), &dir.path().join("out")).unwrap();
    let got: Vec<(EffectAction, String)> = report
        .effects
        .iter()
        .map(|e| (e.action, e.content.as_ref().map(|c| c.to_string()).unwrap_or_default()))
        .collect();
    assert_eq!(got, demo::tv_expected_actions());
    assert_eq!(report.effects[0].parameter, Some(1.0));
    assert!(report.media.is_playing(&"content1".into()));
    for name in ["trajectory.csv", "effects.jsonl", "report.json"] {
        assert!(dir.path().join("out").join(name).is_file(), "{name}");
    }
}

#[test]
fn repeated_runs_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let scene = tv_scene(dir.path());
    let script = demo::tv_script();
    harness::run_to_dir(&scene, &script, &dir.path().join("a")).unwrap();
    harness::run_to_dir(&scene, &script, &dir.path().join("b")).unwrap();
    for name in ["trajectory.csv", "effects.jsonl"] {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        let b = fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
}

#[test]
fn tv_scene_survives_save_and_load() {
    let dir = tempfile::tempdir().unwrap();
    let scene = tv_scene(dir.path());
    let path = dir.path().join("tv.idi.json");
    save_scene(&scene, &path).unwrap();
    let loaded = load_scene(&path).unwrap();
    let (a, ta) = harness::run(&scene, &demo::tv_script()).unwrap();
    let (b, tb) = harness::run(&loaded, &demo::tv_script()).unwrap();
    assert_eq!(ta, tb);
    assert_eq!(a.effects, b.effects);
}

#[test]
fn trajectory_has_one_row_per_body_and_step() {
    let f = demo::taxonomy_fixture(JointType::Hinge).unwrap();
    let script = EventScript::new(f.script.events.clone(), 1.0);
    let (report, csv) = harness::run(&f.scene, &script).unwrap();
    assert_eq!(report.steps, 120);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(TRAJECTORY_HEADER));
    assert_eq!(lines.count(), 121 * 2);
    assert_eq!(report.energy.len(), 121);
}

#[test]
fn bad_widget_events_are_recorded_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let scene = tv_scene(dir.path());
    let events = vec![
        ScriptEvent::Widget(WidgetEvent { time: 0.1, widget: WidgetId::new("widget9"), kind: WidgetEventKind::Press }),
        // A screen cannot be rotated.
        ScriptEvent::Widget(WidgetEvent {
            time: 0.2,
            widget: WidgetId::new(demo::TV_SCREEN),
            kind: WidgetEventKind::Rotate { angle: 1.0 },
        }),
        ScriptEvent::Widget(WidgetEvent {
            time: 0.3,
            widget: WidgetId::new(demo::TV_BUTTON),
            kind: WidgetEventKind::Press,
        }),
        ScriptEvent::Widget(WidgetEvent {
            time: 5.0,
            widget: WidgetId::new(demo::TV_BUTTON),
            kind: WidgetEventKind::Press,
        }),
    ];
    let (report, _) = harness::run(&scene, &EventScript::new(events, 1.0)).unwrap();
    let outcomes: Vec<(EventOutcome, Option<&str>)> =
        report.events.iter().map(|e| (e.outcome, e.error.as_deref())).collect();
    assert_eq!(
        outcomes,
        vec![
            (EventOutcome::Rejected, Some("UnknownWidget")),
            (EventOutcome::Rejected, Some("EventKindMismatch")),
            (EventOutcome::Effect, None),
            (EventOutcome::Rejected, Some("AfterEnd")),
        ]
    );
    assert_eq!(report.events[2].step, 36);
    assert_eq!(report.effects.len(), 1);
    assert_eq!(report.effects[0].action, EffectAction::Play);
}

#[test]
fn invalid_scene_is_refused() {
    let mut f = demo::taxonomy_fixture(JointType::Hinge).unwrap();
    f.scene.joints[0].base = "seg7".into();
    assert!(matches!(harness::run(&f.scene, &f.script), Err(HarnessError::InvalidScene(_))));
}

#[test]
fn script_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let assets = demo::write_tv_assets(dir.path()).unwrap();
    let script = EventScript::load(&assets.script).unwrap();
    assert_eq!(script, demo::tv_script());
    fs::write(dir.path().join("bad.jsonl"), "{\"event\":\"wave\",\"time\":0}\n").unwrap();
    assert!(matches!(EventScript::load(&dir.path().join("bad.jsonl")), Err(HarnessError::ScriptError { line: 1, .. })));
}
