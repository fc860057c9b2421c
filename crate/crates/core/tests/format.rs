use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use idi_core::demo;
use idi_core::format::{from_bytes, load_scene, mesh_dir_name, save_scene, FormatError};
use idi_core::mesh::shapes;
use idi_core::physics::{JointType, Resistance};
use idi_core::IdiScene;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

fn fixtures(dir: &Path) -> Vec<IdiScene> {
    let mut out = vec![IdiScene::from_mesh("cube", shapes::unit_cube())];
    for t in JointType::ALL {
        out.push(demo::taxonomy_fixture(t).unwrap().scene);
    }
    out.push(demo::pendulum_fixture(1.0).unwrap().scene);
    out.push(demo::dissipation_fixture(Resistance::High).unwrap().scene);
    let assets = demo::write_tv_assets(&dir.join("assets")).unwrap();
    out.push(demo::build_tv_scene(&assets, dir).unwrap());
    out
}

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .flatten()
        .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
        .collect()
}

#[test]
fn save_load_save_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for (i, scene) in fixtures(dir.path()).into_iter().enumerate() {
        let path = dir.path().join(format!("s{i}.idi.json"));
        save_scene(&scene, &path).unwrap();
        let first = fs::read(&path).unwrap();
        let meshes = dir_bytes(&dir.path().join(mesh_dir_name(&path)));
        let loaded = load_scene(&path).unwrap();
        assert_eq!(loaded, scene, "fixture {i}");
        save_scene(&loaded, &path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first, "fixture {i}: document changed");
        assert_eq!(dir_bytes(&dir.path().join(mesh_dir_name(&path))), meshes, "fixture {i}: meshes changed");
    }
}

#[test]
fn unknown_version_and_checksum_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cube.idi.json");
    save_scene(&IdiScene::from_mesh("cube", shapes::unit_cube()), &path).unwrap();
    let mut doc: Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
    doc["version"] = json!("9.9");
    let err = from_bytes(&serde_json::to_vec(&doc).unwrap(), dir.path()).unwrap_err();
    assert_eq!(err, FormatError::UnknownVersion("9.9".into()));

    let mesh = dir.path().join("cube_meshes/seg0.obj");
    let mut text = fs::read_to_string(&mesh).unwrap();
    text.push_str("# edited\n");
    fs::write(&mesh, text).unwrap();
    assert!(matches!(load_scene(&path), Err(FormatError::ChecksumMismatch { .. })));
}

#[test]
fn dangling_joint_fails_validation_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    let mut scene = demo::taxonomy_fixture(JointType::Hinge).unwrap().scene;
    scene.joints[0].movable = "seg42".into();
    let err = save_scene(&scene, &dir.path().join("x.idi.json")).unwrap_err();
    match err {
        FormatError::ValidationFailure(v) => {
            assert!(v.iter().any(|v| v.subject == "joint0"), "{v:?}")
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn unwritable_target_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    let err = save_scene(&IdiScene::from_mesh("c", shapes::unit_cube()), &blocker.join("c.idi.json")).unwrap_err();
    assert!(matches!(err, FormatError::IoError(_)), "{err:?}");
}

fn random_value(rng: &mut ChaCha8Rng, depth: u32) -> Value {
    match rng.random_range(0..10) {
        0 => Value::Null,
        1 => json!(rng.random_bool(0.5)),
        2 => json!(rng.random_range(-3i64..10)),
        3 => json!([1e308, -1e308, 0.0, -0.0, 1e-320, 0.5][rng.random_range(0..6)]),
        4 => json!(
            ["", "seg0", "joint0", "widget0", "content0", "../../etc/passwd", "hinge", "1.0", "scene"]
                [rng.random_range(0..9)]
        ),
        5 => json!([0.0, 0.0, 0.0, 0.0]),
        6 => json!({"kind": "widget", "id": "widget0"}),
        7 if depth < 3 => Value::Array((0..rng.random_range(0..4)).map(|_| random_value(rng, depth + 1)).collect()),
        8 if depth < 3 => {
            let keys = ["id", "type", "a", "b", "c", "path", "sha256", "x", "kind", "role"];
            Value::Object(
                (0..rng.random_range(0..4))
                    .map(|_| (keys[rng.random_range(0..keys.len())].to_string(), random_value(rng, depth + 1)))
                    .collect(),
            )
        }
        _ => json!(rng.random_range(-1e3..1e3)),
    }
}

/// Visits a random node of the tree and applies `f` to it.
fn mutate_random_node(v: &mut Value, rng: &mut ChaCha8Rng, f: &mut dyn FnMut(&mut Value, &mut ChaCha8Rng)) {
    let descend = rng.random_bool(0.8);
    match v {
        Value::Object(map) if descend && !map.is_empty() => {
            let i = rng.random_range(0..map.len());
            let key = map.keys().nth(i).unwrap().clone();
            mutate_random_node(map.get_mut(&key).unwrap(), rng, f);
        }
        Value::Array(items) if descend && !items.is_empty() => {
            let i = rng.random_range(0..items.len());
            mutate_random_node(&mut items[i], rng, f);
        }
        _ => f(v, rng),
    }
}

fn mutate(base: &[u8], doc: &Value, rng: &mut ChaCha8Rng) -> Vec<u8> {
    match rng.random_range(0..8) {
        0 => {
            let mut b = base.to_vec();
            for _ in 0..rng.random_range(1..6) {
                let i = rng.random_range(0..b.len());
                b[i] = rng.random();
            }
            b
        }
        1 => base[..rng.random_range(0..base.len())].to_vec(),
        2 => (0..rng.random_range(0..200)).map(|_| rng.random()).collect(),
        3 => {
            let mut d = doc.clone();
            mutate_random_node(&mut d, rng, &mut |v, rng| *v = random_value(rng, 0));
            serde_json::to_vec(&d).unwrap()
        }
        4 => {
            let mut d = doc.clone();
            mutate_random_node(&mut d, rng, &mut |v, rng| {
                if let Value::Object(m) = v {
                    if !m.is_empty() {
                        let k = m.keys().nth(rng.random_range(0..m.len())).unwrap().clone();
                        m.remove(&k);
                    }
                }
            });
            serde_json::to_vec(&d).unwrap()
        }
        5 => {
            let mut d = doc.clone();
            mutate_random_node(&mut d, rng, &mut |v, rng| {
                if let Value::Array(items) = v {
                    if !items.is_empty() {
                        let i = rng.random_range(0..items.len());
                        if rng.random_bool(0.5) {
                            let dup = items[i].clone();
                            items.push(dup);
                        } else {
                            items.remove(i);
                        }
                    }
                }
            });
            serde_json::to_vec(&d).unwrap()
        }
        6 => {
            // Numeric nudges keep the document well-formed but break geometry.
            let mut d = doc.clone();
            mutate_random_node(&mut d, rng, &mut |v, rng| {
                if let Some(x) = v.as_f64() {
                    *v = json!(x + rng.random_range(-0.5..0.5));
                }
            });
            serde_json::to_vec(&d).unwrap()
        }
        _ => {
            let mut d = doc.clone();
            mutate_random_node(&mut d, rng, &mut |v, rng| {
                if let Value::Object(m) = v {
                    m.insert("unexpected".into(), random_value(rng, 1));
                }
            });
            serde_json::to_vec(&d).unwrap()
        }
    }
}

#[test]
fn loader_survives_ten_thousand_fuzzed_documents() {
    let dir = tempfile::tempdir().unwrap();
    let mut bases = Vec::new();
    for (i, scene) in fixtures(dir.path()).into_iter().enumerate().filter(|(i, _)| [0, 3, 9].contains(i)) {
        let path = dir.path().join(format!("f{i}.idi.json"));
        save_scene(&scene, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        let doc: Value = serde_json::from_slice(&bytes).unwrap();
        bases.push((bytes, doc));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x1d1);
    let (mut ok, mut errors) = (0, BTreeMap::<String, usize>::new());
    for case in 0..10_000 {
        let (bytes, doc) = &bases[case % bases.len()];
        let input = mutate(bytes, doc, &mut rng);
        let result = catch_unwind(AssertUnwindSafe(|| from_bytes(&input, dir.path())));
        match result {
            Err(_) => panic!("case {case} panicked on input {:?}", String::from_utf8_lossy(&input)),
            Ok(Ok(scene)) => {
                assert!(scene.validate().is_empty(), "case {case}: accepted an invalid scene");
                ok += 1;
            }
            Ok(Err(e)) => {
                let kind = format!("{e:?}").split(['(', ' ', '{']).next().unwrap().to_string();
                *errors.entry(kind).or_default() += 1;
            }
        }
    }
    assert!(errors.values().sum::<usize>() > 5_000, "{errors:?}");
    assert!(ok > 0);
    for kind in ["ParseError", "ValidationFailure", "ChecksumMismatch"] {
        assert!(errors.contains_key(kind), "never hit {kind}: {errors:?}");
    }
}
