//! Runs every primary acceptance criterion and prints one PASS/FAIL line
//! each. Exits non-zero if any fails.

// `ensure!(x <= tol)` must fail on NaN, so the negation is intended.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use idi_core::content::{BindingRole, BindingTarget, ContentItem, ContentKind, ContentMetadata};
use idi_core::demo;
use idi_core::format::{from_bytes, load_scene, mesh_dir_name, save_scene};
use idi_core::harness::{self, angle_about, RunReport};
use idi_core::ids::{ContentId, WidgetId};
use idi_core::mesh::{compute_stats, shapes, TriMesh};
use idi_core::physics::{JointType, Resistance, SimState};
use idi_core::slicer::{slice_by_plane, CutPlane};
use idi_core::spectral::{canonical_labels, segment, spectral_embed, DualGraph, SegmentParams};
use idi_core::widgets::{
    dispatch, EffectAction, KnobMode, MediaState, Placement, WidgetCategory, WidgetEvent, WidgetEventKind,
};
use idi_core::IdiScene;
use nalgebra::{DMatrix, Point3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)*) => {
        if !$cond {
            return Err(format!($($msg)*));
        }
    };
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("slicing conservation", slicing),
        ("spectral correctness", spectral),
        ("joint taxonomy", taxonomy),
        ("pendulum oracle", pendulum),
        ("dissipation", dissipation),
        ("determinism", determinism),
        ("format stability", format),
        ("widget semantics", widgets),
        ("end-to-end pipeline", end_to_end),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let result = catch_unwind(check).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS  {name}: {detail} [{secs:.1} s]"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why} [{secs:.1} s]");
            }
        }
    }
    println!("{} of {} primary criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if (0.1..=1.0).contains(&v.norm()) {
            return v.normalize();
        }
    }
}

fn intersecting_plane(mesh: &TriMesh, rng: &mut ChaCha8Rng) -> CutPlane {
    let n = unit(rng);
    let (lo, hi) = mesh
        .vertices()
        .iter()
        .map(|p| p.coords.dot(&n))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
    let margin = 0.05 * (hi - lo);
    CutPlane::new(Point3::from(n * rng.random_range(lo + margin..hi - margin)), n).unwrap()
}

fn slicing() -> Check {
    let fixtures = [
        ("cube", shapes::unit_cube()),
        ("icosphere", shapes::icosphere(1.0, 3)),
        ("torus", shapes::torus(1.0, 0.3, 48, 24)),
        ("dumbbell", shapes::dumbbell(0.05, 0.1, 0.02, 16, 8, 6)),
        ("bridge", shapes::bridge()),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce);
    let mut worst = 0.0f64;
    for (name, mesh) in &fixtures {
        let v = compute_stats(mesh).volume;
        for i in 0..20 {
            let set =
                slice_by_plane(mesh, &intersecting_plane(mesh, &mut rng)).map_err(|e| format!("{name} #{i}: {e}"))?;
            ensure!(set.parts.len() == 2, "{name} #{i}: {} parts", set.parts.len());
            ensure!(set.parts.iter().all(|p| p.mesh.is_watertight()), "{name} #{i}: open half");
            let sum: f64 = set.parts.iter().map(|p| compute_stats(&p.mesh).volume).sum();
            worst = worst.max((sum - v).abs() / v);
        }
    }
    ensure!(worst <= 1e-6, "relative volume error {worst:e}");

    let big = shapes::torus(1.0, 0.3, 250, 100);
    ensure!(big.triangle_count() == 50_000, "fixture has {} triangles", big.triangle_count());
    let mut slowest = 0.0f64;
    for _ in 0..5 {
        let plane = intersecting_plane(&big, &mut rng);
        let start = Instant::now();
        slice_by_plane(&big, &plane).map_err(|e| e.to_string())?;
        slowest = slowest.max(start.elapsed().as_secs_f64());
    }
    ensure!(slowest < 1.0, "50k slice took {slowest:.3} s");
    Ok(format!("100 cuts, worst volume error {worst:.1e}; 50k-triangle slice {slowest:.3} s"))
}

fn dense_eigenvalues(graph: &DualGraph) -> Vec<f64> {
    let n = graph.node_count();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for e in graph.edges() {
        a[(e.a as usize, e.b as usize)] += e.affinity;
        a[(e.b as usize, e.a as usize)] += e.affinity;
    }
    let d: Vec<f64> = (0..n).map(|i| a.row(i).sum()).collect();
    let l = DMatrix::from_fn(n, n, |i, j| f64::from(u8::from(i == j)) - a[(i, j)] / (d[i] * d[j]).sqrt());
    let mut ev: Vec<f64> = l.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn spectral() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5bec);
    let mut worst = 0.0f64;
    for case in 0..10 {
        let parts = rng.random_range(1..6usize);
        let mut edges = Vec::new();
        let mut n = 0u32;
        for _ in 0..parts {
            let size = rng.random_range(2..10u32);
            for i in 1..size {
                edges.push((n + i - 1, n + i, rng.random_range(0.05..1.0)));
            }
            for _ in 0..size {
                let (i, j) = (rng.random_range(0..size), rng.random_range(0..size));
                if i + 1 < j {
                    edges.push((n + i, n + j, rng.random_range(0.05..1.0)));
                }
            }
            n += size;
        }
        let graph = DualGraph::from_affinity(n as usize, edges);
        let emb = spectral_embed(&graph, n as usize - 1).map_err(|e| e.to_string())?;
        ensure!(
            emb.zero_multiplicity() == parts,
            "case {case}: multiplicity {} for {parts} parts",
            emb.zero_multiplicity()
        );
        for (got, want) in emb.eigenvalues.iter().zip(dense_eigenvalues(&graph)) {
            worst = worst.max((got - want.clamp(0.0, 2.0)).abs());
        }
    }
    ensure!(worst <= 1e-9, "dense oracle disagreement {worst:e}");

    let a = shapes::icosphere(0.1, 2);
    let spheres = TriMesh::merge(&[&a, &a.translated(Vector3::new(0.5, 0.0, 0.0))]);
    let (component, _) = spheres.triangle_components();
    let seg = segment(&spheres, &SegmentParams::default()).map_err(|e| e.to_string())?;
    let spheres_k = seg.k;
    for t in 0..spheres.triangle_count() {
        let u = (0..spheres.triangle_count()).find(|&s| seg.labels[s] == seg.labels[t]).unwrap();
        ensure!(component[u] == component[t], "spheres merged under label {}", seg.labels[t]);
    }

    let dumbbell = shapes::dumbbell(0.05, 0.1, 0.02, 16, 8, 6);
    let auto = segment(&dumbbell, &SegmentParams::default()).map_err(|e| e.to_string())?;
    ensure!(matches!(auto.k, 2 | 3), "dumbbell auto k = {}", auto.k);
    let forced =
        segment(&dumbbell, &SegmentParams { k: Some(3), ..SegmentParams::default() }).map_err(|e| e.to_string())?;
    let labels = canonical_labels(&forced.labels);
    // Golden partition: 240 bulb, 192 neck, 240 bulb triangles in revolve order.
    let golden: Vec<u32> =
        [(0, 240), (1, 192), (2, 240)].iter().flat_map(|&(l, n)| std::iter::repeat_n(l, n)).collect();
    ensure!(labels == golden, "forced k=3 partition differs from golden");

    let big = shapes::dumbbell(0.05, 0.1, 0.02, 80, 50, 26);
    let start = Instant::now();
    let seg = segment(&big, &SegmentParams::default()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 10.0, "20k-face segmentation took {secs:.2} s");
    Ok(format!(
        "oracle error {worst:.1e}; spheres k={spheres_k}; dumbbell auto k={}; {}-face segmentation {secs:.2} s (k={})",
        auto.k,
        big.triangle_count(),
        seg.k
    ))
}

fn taxonomy() -> Check {
    let mut rows = Vec::new();
    for t in JointType::ALL {
        let f = demo::taxonomy_fixture(t).map_err(|e| e.to_string())?;
        ensure!(f.scene.sim.dt == 1.0 / 120.0 && f.script.duration == 10.0, "{t:?}: fixture not 10 s at 120 Hz");
        let (report, _) = harness::run(&f.scene, &f.script).map_err(|e| e.to_string())?;
        let d = &report.dof[0];
        ensure!(d.locked_translation() <= 1e-3, "{t:?}: translation drift {:.2e} m", d.locked_translation());
        ensure!(d.locked_rotation() <= 1e-2, "{t:?}: rotation drift {:.2e} rad", d.locked_rotation());
        let (allowed, need) =
            if t == JointType::Plane { (d.allowed_translation(), 0.05) } else { (d.allowed_rotation(), 0.1) };
        ensure!(allowed > need, "{t:?}: allowed motion {allowed:.3} <= {need}");
        rows.push(format!("{} {allowed:.2}", t.name()));
    }
    Ok(rows.join(", "))
}

fn pendulum() -> Check {
    let f = demo::pendulum_fixture(10.0).map_err(|e| e.to_string())?;
    // Compound pendulum from the bob's dimensions: T = 2π sqrt(I_pivot / (m g d)).
    let [w, h, _] = demo::PENDULUM_SIZE;
    let d = h / 2.0;
    let expected = TAU * (((w * w + h * h) / 12.0 + d * d) / (9.81 * d)).sqrt();
    ensure!((expected - demo::pendulum_analytic_period(9.81)).abs() < 1e-12, "library period disagrees");
    let mut state = SimState::new(&f.scene);
    let release = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 5f64.to_radians());
    state.body_mut(&f.movable).unwrap().rotate_about(&Point3::origin(), release);
    let (mut times, mut angles) = (Vec::new(), Vec::new());
    let start = Instant::now();
    for _ in 0..10_000 {
        state.advance(&f.scene, f.scene.sim.dt).map_err(|e| e.to_string())?;
        times.push(state.time);
        angles.push(angle_about(&state, &f.movable, &Vector3::z()).unwrap());
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 5.0, "10 000 steps took {secs:.2} s");
    let measured = demo::measured_period(&times, &angles).ok_or("no oscillation")?;
    let err = (measured - expected).abs() / expected;
    ensure!(err <= 0.05, "period {measured:.4} s vs {expected:.4} s");
    Ok(format!("period {measured:.4} s vs analytic {expected:.4} s ({:.2}%); 10k steps {secs:.2} s", 100.0 * err))
}

fn dissipation() -> Check {
    let mut settle = Vec::new();
    for r in [Resistance::Low, Resistance::Medium, Resistance::High] {
        let f = demo::dissipation_fixture(r).map_err(|e| e.to_string())?;
        ensure!(f.scene.sim.gravity == Vector3::zeros(), "{r}: gravity on");
        let (report, _) = harness::run(&f.scene, &f.script).map_err(|e| e.to_string())?;
        let after = demo::excitation_end(&f.script);
        let per = (0.5 / report.dt).round() as usize;
        let post: Vec<f64> = report.energy.iter().filter(|e| e.time > after).map(|e| e.kinetic).collect();
        let means: Vec<f64> = post.chunks_exact(per).map(|c| c.iter().sum::<f64>() / per as f64).collect();
        ensure!(means.windows(2).all(|w| w[1] <= w[0]), "{r}: windowed kinetic energy rose");
        let t = settle_time(&report).ok_or(format!("{r}: never settled"))?;
        settle.push(t);
    }
    ensure!(settle[2] <= settle[1] && settle[1] <= settle[0], "settling order {settle:?}");
    Ok(format!("settle times low {:.2} s, medium {:.2} s, high {:.2} s", settle[0], settle[1], settle[2]))
}

fn settle_time(report: &RunReport) -> Option<f64> {
    let last = report.energy.last()?;
    if last.kinetic >= 1e-6 {
        return None;
    }
    Some(report.energy.iter().rev().find(|e| e.kinetic >= 1e-6).map_or(0.0, |e| e.time + report.dt))
}

fn idi(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_idi")).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "idi {} exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn bundled(p: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets/tv").join(p).to_string_lossy().into_owned()
}

/// Builds the TV scene from the bundled assets through the CLI and returns
/// the scene path.
fn tv_pipeline(dir: &Path) -> Result<String, String> {
    let scene = dir.join("tv.idi.json").to_string_lossy().into_owned();
    idi(&["import", &bundled("tv.obj"), "-o", &scene])?;
    let p = demo::TV_KNOB_PLANE.map(|v| v.to_string()).join(",");
    idi(&["slice", &scene, "--segment", "seg0", "--plane", &p])?;
    idi(&["joint", "add", &scene, "--type", "pivot", "--base", "seg2", "--movable", "seg1", "--resistance", "medium"])?;
    let at = |p: [f64; 3]| p.map(|v| v.to_string()).join(",");
    idi(&["widget", "add", &scene, "--category", "knob", "--at", &at(demo::TV_KNOB_CENTER), "--host", "seg1"])?;
    idi(&["widget", "add", &scene, "--category", "screen", "--at", &at(demo::TV_SCREEN_AT), "--host", "seg2"])?;
    idi(&["widget", "add", &scene, "--category", "button", "--at", &at(demo::TV_BUTTON_AT), "--host", "seg2"])?;
    for ch in 0..demo::TV_CHANNELS {
        idi(&["content", "import", &scene, &bundled(&format!("videos/channel{}.mp4", ch + 1)), "--kind", "video"])?;
        idi(&["content", "bind", &scene, "--content", &format!("content{ch}"), "--target", "scene"])?;
    }
    idi(&["validate", &scene])?;
    Ok(scene)
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scene = tv_pipeline(dir.path())?;
    let script = bundled("tv_script.jsonl");
    let mut outputs = Vec::new();
    for run in ["a", "b", "c"] {
        let out = dir.path().join(run);
        idi(&["simulate", &scene, "--script", &script, "-o", &out.to_string_lossy()])?;
        let traj = fs::read(out.join("trajectory.csv")).map_err(|e| e.to_string())?;
        let effects = fs::read(out.join("effects.jsonl")).map_err(|e| e.to_string())?;
        outputs.push((traj, effects));
    }
    ensure!(outputs.windows(2).all(|w| w[0].0 == w[1].0), "trajectory.csv differs between runs");
    ensure!(outputs.windows(2).all(|w| w[0].1 == w[1].1), "effects.jsonl differs between runs");
    Ok(format!("3 runs, {} trajectory bytes identical", outputs[0].0.len()))
}

fn format_fixtures(dir: &Path) -> Result<Vec<IdiScene>, String> {
    let mut out = vec![IdiScene::from_mesh("cube", shapes::unit_cube())];
    for t in JointType::ALL {
        out.push(demo::taxonomy_fixture(t).map_err(|e| e.to_string())?.scene);
    }
    out.push(demo::pendulum_fixture(2.0).map_err(|e| e.to_string())?.scene);
    for r in [Resistance::Low, Resistance::Medium, Resistance::High] {
        out.push(demo::dissipation_fixture(r).map_err(|e| e.to_string())?.scene);
    }
    let assets = demo::write_tv_assets(&dir.join("assets")).map_err(|e| e.to_string())?;
    out.push(demo::build_tv_scene(&assets, dir).map_err(|e| e.to_string())?);
    Ok(out)
}

fn junk(rng: &mut ChaCha8Rng, depth: u32) -> Value {
    match rng.random_range(0..8) {
        0 => Value::Null,
        1 => json!(rng.random_bool(0.5)),
        2 => json!(rng.random_range(-5i64..20)),
        3 => json!(["", "seg0", "joint0", "widget1", "content2", "/abs", "../up", "2.0"][rng.random_range(0..8)]),
        4 if depth < 2 => Value::Array((0..rng.random_range(0..4)).map(|_| junk(rng, depth + 1)).collect()),
        5 if depth < 2 => {
            let keys = ["id", "type", "path", "sha256", "anchor", "kind"];
            Value::Object(
                (0..rng.random_range(0..3))
                    .map(|_| (keys[rng.random_range(0..6)].to_string(), junk(rng, depth + 1)))
                    .collect(),
            )
        }
        _ => json!(rng.random_range(-1e6..1e6)),
    }
}

fn poke(v: &mut Value, rng: &mut ChaCha8Rng, kind: u32) {
    let deeper = rng.random_bool(0.75);
    match v {
        Value::Object(m) if deeper && !m.is_empty() => {
            let k = m.keys().nth(rng.random_range(0..m.len())).unwrap().clone();
            poke(m.get_mut(&k).unwrap(), rng, kind);
        }
        Value::Array(a) if deeper && !a.is_empty() => {
            let i = rng.random_range(0..a.len());
            poke(&mut a[i], rng, kind);
        }
        Value::Object(m) if kind == 1 && !m.is_empty() => {
            let k = m.keys().nth(rng.random_range(0..m.len())).unwrap().clone();
            m.remove(&k);
        }
        Value::Array(a) if kind == 2 && !a.is_empty() => {
            let i = rng.random_range(0..a.len());
            let dup = a[i].clone();
            a.insert(i, dup);
        }
        _ => match v.as_f64() {
            Some(x) if kind == 3 => *v = json!(x * rng.random_range(-2.0..2.0)),
            _ => *v = junk(rng, 0),
        },
    }
}

fn format() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fixtures = format_fixtures(dir.path())?;
    let mut bases = Vec::new();
    for (i, scene) in fixtures.iter().enumerate() {
        let path = dir.path().join(format!("fixture{i}.idi.json"));
        save_scene(scene, &path).map_err(|e| e.to_string())?;
        let first = fs::read(&path).map_err(|e| e.to_string())?;
        let meshes = dir.path().join(mesh_dir_name(&path));
        let mesh_bytes = |p: &Path| -> BTreeMap<String, Vec<u8>> {
            fs::read_dir(p)
                .unwrap()
                .flatten()
                .map(|e| (e.file_name().to_string_lossy().into(), fs::read(e.path()).unwrap()))
                .collect()
        };
        let before = mesh_bytes(&meshes);
        let loaded = load_scene(&path).map_err(|e| format!("fixture {i}: {e}"))?;
        save_scene(&loaded, &path).map_err(|e| e.to_string())?;
        ensure!(fs::read(&path).map_err(|e| e.to_string())? == first, "fixture {i}: document bytes changed");
        ensure!(mesh_bytes(&meshes) == before, "fixture {i}: mesh bytes changed");
        let doc: Value = serde_json::from_slice(&first).map_err(|e| e.to_string())?;
        bases.push((first, doc));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0xf022);
    let (mut accepted, mut rejected) = (0, 0);
    for case in 0..10_000 {
        let (bytes, doc) = &bases[rng.random_range(0..bases.len())];
        let input: Vec<u8> = match rng.random_range(0..6) {
            0 => {
                let mut b = bytes.clone();
                for _ in 0..rng.random_range(1..8) {
                    let i = rng.random_range(0..b.len());
                    b[i] = rng.random();
                }
                b
            }
            1 => bytes[..rng.random_range(0..bytes.len())].to_vec(),
            k => {
                let mut d = doc.clone();
                poke(&mut d, &mut rng, k - 2);
                serde_json::to_vec(&d).unwrap()
            }
        };
        match catch_unwind(AssertUnwindSafe(|| from_bytes(&input, dir.path()))) {
            Err(_) => return Err(format!("loader panicked on case {case}")),
            Ok(Ok(scene)) => {
                ensure!(scene.validate().is_empty(), "case {case}: accepted an invalid scene");
                accepted += 1;
            }
            Ok(Err(_)) => rejected += 1,
        }
    }
    Ok(format!("{} fixtures round-trip; fuzz: {rejected} errors, {accepted} valid, 0 crashes", fixtures.len()))
}

fn item(n: usize, kind: ContentKind) -> ContentItem {
    ContentItem {
        id: ContentId::new(format!("content{n}")),
        kind,
        source: format!("c{n}"),
        file: format!("content/c{n}"),
        size: 0,
        checksum: String::new(),
        metadata: ContentMetadata::default(),
        annotation: None,
    }
}

fn random_scene(rng: &mut ChaCha8Rng) -> IdiScene {
    let mut scene = IdiScene::from_mesh("random", shapes::unit_cube());
    let host = scene.segments[0].id.clone();
    for i in 0..rng.random_range(1..6) {
        let category = WidgetCategory::ALL[rng.random_range(0..4)];
        let id = scene.spawn_widget(category, None, Placement::at(Vector3::new(i as f64, 0.0, 0.0))).unwrap();
        if rng.random_bool(0.5) {
            scene.attach_widget(&id, &host).unwrap();
        }
        let w = scene.widget_mut(&id).unwrap();
        w.mode = if rng.random_bool(0.3) { KnobMode::Continuous } else { KnobMode::Detented };
        w.detents = rng.random_bool(0.5).then(|| rng.random_range(1..9));
    }
    let kinds = [ContentKind::Audio, ContentKind::Video, ContentKind::Picture, ContentKind::Text];
    for n in 0..rng.random_range(0..6) {
        scene.add_content(item(n, kinds[rng.random_range(0..4)]));
    }
    for _ in 0..rng.random_range(0..8) {
        if scene.content.is_empty() {
            break;
        }
        let content = scene.content[rng.random_range(0..scene.content.len())].id.clone();
        let target = match rng.random_range(0..3) {
            0 => BindingTarget::Scene,
            1 => BindingTarget::Segment(host.clone()),
            _ => BindingTarget::Widget(scene.widgets[rng.random_range(0..scene.widgets.len())].id.clone()),
        };
        let _ = scene.bind_content(&content, target, BindingRole::PlaybackSource);
    }
    scene
}

fn random_events(rng: &mut ChaCha8Rng, scene: &IdiScene) -> Vec<WidgetEvent> {
    (0..rng.random_range(1..25))
        .map(|i| WidgetEvent {
            time: i as f64 * 0.05,
            widget: scene.widgets[rng.random_range(0..scene.widgets.len())].id.clone(),
            kind: match rng.random_range(0..4) {
                0 => WidgetEventKind::Press,
                1 => WidgetEventKind::Release,
                2 => WidgetEventKind::Drag { value: rng.random_range(-0.5..1.5) },
                _ => WidgetEventKind::Rotate { angle: rng.random_range(-15.0..15.0) },
            },
        })
        .collect()
}

fn replay(scene: &IdiScene, events: &[WidgetEvent]) -> (String, MediaState) {
    let mut media = MediaState::default();
    let log: Vec<String> = events.iter().map(|e| format!("{:?}", dispatch(scene, &mut media, e))).collect();
    (log.join("\n"), media)
}

fn widgets() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x3d9e7);
    for case in 0..300 {
        let scene = random_scene(&mut rng);
        let events = random_events(&mut rng, &scene);
        let mut hidden = scene.clone();
        for w in &scene.widgets {
            hidden.set_visibility(&w.id, rng.random_bool(0.5)).unwrap();
        }
        ensure!(replay(&scene, &events) == replay(&hidden, &events), "scene {case}: visibility changed dispatch");
    }

    let mut knobs = 0;
    for case in 0..1000 {
        let mut scene = IdiScene::from_mesh("knob", shapes::unit_cube());
        let knob = scene.spawn_widget(WidgetCategory::Knob, None, Placement::default()).unwrap();
        let detents = rng.random_bool(0.5).then(|| rng.random_range(1..12u32));
        scene.widget_mut(&knob).unwrap().detents = detents;
        for n in 0..rng.random_range(1..8) {
            let id = scene.add_content(item(n, ContentKind::Video));
            scene.bind_content(&id, BindingTarget::Widget(knob.clone()), BindingRole::PlaybackSource).unwrap();
        }
        let (start, theta, turns) =
            (rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0), rng.random_range(-3..=3));
        let select = |angle: f64| {
            let mut media = MediaState::default();
            let rotate =
                |a| WidgetEvent { time: 0.0, widget: knob.clone(), kind: WidgetEventKind::Rotate { angle: a } };
            dispatch(&scene, &mut media, &rotate(start)).unwrap();
            let e = dispatch(&scene, &mut media, &rotate(angle)).unwrap().remove(0);
            (e.action, e.content, e.parameter)
        };
        let shifted = theta + TAU * f64::from(turns);
        ensure!(select(theta) == select(shifted), "case {case}: knob selection not 2π-periodic");
        knobs += 1;
    }

    for case in 0..1000 {
        let mut scene = IdiScene::from_mesh("slider", shapes::unit_cube());
        let slider = scene.spawn_widget(WidgetCategory::Slider, None, Placement::default()).unwrap();
        let value = rng.random_range(-0.5..1.5);
        let mut media = MediaState::default();
        let ev = WidgetEvent { time: 0.0, widget: slider, kind: WidgetEventKind::Drag { value } };
        let effect = dispatch(&scene, &mut media, &ev).map_err(|e| e.to_string())?.remove(0);
        ensure!(effect.action == EffectAction::SetVolume, "case {case}: {:?}", effect.action);
        ensure!(effect.parameter == Some(value.clamp(0.0, 1.0)), "case {case}: {value} -> {:?}", effect.parameter);
    }
    Ok(format!("300 random scenes visibility-independent; {knobs} knob and 1000 slider events"))
}

fn end_to_end() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scene = tv_pipeline(dir.path())?;
    let out = dir.path().join("run");
    idi(&["simulate", &scene, "--script", &bundled("tv_script.jsonl"), "-o", &out.to_string_lossy()])?;
    let log = fs::read_to_string(out.join("effects.jsonl")).map_err(|e| e.to_string())?;
    let got: Vec<(String, String)> = log
        .lines()
        .map(|l| {
            let v: Value = serde_json::from_str(l).unwrap();
            (v["action"].as_str().unwrap_or("").to_owned(), v["content"].as_str().unwrap_or("").to_owned())
        })
        .collect();
    let want = vec![("select".to_owned(), "content1".to_owned()), ("play".to_owned(), "content1".to_owned())];
    ensure!(got == want, "effects {got:?}");
    let golden = fs::read_to_string(bundled("golden/effects.jsonl")).map_err(|e| e.to_string())?;
    ensure!(log == golden, "effects log differs from the recorded golden run");
    ensure!(out.join("trajectory.csv").is_file(), "no trajectory.csv");
    let knob = load_scene(Path::new(&scene)).map_err(|e| e.to_string())?;
    ensure!(knob.widget(&WidgetId::new(demo::TV_KNOB)).and_then(|w| w.host.clone()).is_some(), "knob not attached");
    Ok("effects log = [select content1, play content1] (matches golden), every step exited 0".into())
}
