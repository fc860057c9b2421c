//! The `.idi.json` scene file.
//!
//! The scene document is canonical JSON: object keys sorted, two-space
//! indentation, floats in shortest round-trip form, trailing newline. Equal
//! scenes therefore produce identical bytes. Segment meshes are stored as
//! OBJ files in a sibling `<stem>_meshes/` directory and referenced by
//! relative path and SHA-256.

use std::fs;
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::content::{ContentBinding, ContentItem};
use crate::ids::SegmentId;
use crate::mesh::{parse_obj, to_obj_string};
use crate::physics::JointSpec;
use crate::scene::{IdiScene, Segment, SimConfig, Violation, FORMAT_VERSION};
use crate::slicer::{Provenance, SegmentLabel};
use crate::util::{sha256_hex, write_atomic};
use crate::widgets::WidgetSpec;

pub const SCENE_EXTENSION: &str = ".idi.json";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("parse error: {0}")]
    ParseError(String),
    #[error("unknown format version {0:?}")]
    UnknownVersion(String),
    #[error("checksum mismatch for {path}: expected {expected}, found {actual}")]
    ChecksumMismatch { path: String, expected: String, actual: String },
    #[error("scene failed validation:\n{}", .0.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n"))]
    ValidationFailure(Vec<Violation>),
    #[error("i/o error: {0}")]
    IoError(String),
}

/// Mesh reference inside the scene document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshRef {
    /// Relative to the scene file's directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub triangles: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentRecord {
    pub id: SegmentId,
    pub label: SegmentLabel,
    pub provenance: Provenance,
    pub mesh: MeshRef,
}

/// The on-disk form of an [`IdiScene`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDocument {
    pub version: String,
    pub name: String,
    pub segments: Vec<SegmentRecord>,
    pub joints: Vec<JointSpec>,
    pub widgets: Vec<WidgetSpec>,
    #[serde(default)]
    pub content: Vec<ContentItem>,
    pub bindings: Vec<ContentBinding>,
    pub sim: SimConfig,
}

/// Directory name for a scene's mesh files: `tv.idi.json` → `tv_meshes`.
pub fn mesh_dir_name(scene_path: &Path) -> String {
    let file = scene_path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    let stem = file
        .strip_suffix(SCENE_EXTENSION)
        .or_else(|| file.rsplit_once('.').map(|(s, _)| s))
        .unwrap_or(&file)
        .to_owned();
    format!("{stem}_meshes")
}

/// Canonical bytes of any serializable value.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<Vec<u8>, FormatError> {
    // serde_json's default map is ordered by key, so going through `Value`
    // sorts every object.
    let v = serde_json::to_value(value).map_err(|e| FormatError::ParseError(e.to_string()))?;
    let mut out = serde_json::to_vec_pretty(&v).map_err(|e| FormatError::ParseError(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> FormatError {
    FormatError::IoError(format!("{}: {e}", path.display()))
}

/// Document and mesh files for a scene, without touching the disk.
pub fn to_document(scene: &IdiScene, mesh_dir: &str) -> (SceneDocument, Vec<(String, Vec<u8>)>) {
    let mut files = Vec::with_capacity(scene.segments.len());
    let segments = scene
        .segments
        .iter()
        .map(|s| {
            let bytes = to_obj_string(&s.mesh).into_bytes();
            let path = format!("{mesh_dir}/{}.obj", s.id);
            let record = SegmentRecord {
                id: s.id.clone(),
                label: s.label,
                provenance: s.provenance,
                mesh: MeshRef { path: path.clone(), sha256: sha256_hex(&bytes), triangles: s.mesh.triangle_count() },
            };
            files.push((path, bytes));
            record
        })
        .collect();
    let doc = SceneDocument {
        version: scene.version.clone(),
        name: scene.name.clone(),
        segments,
        joints: scene.joints.clone(),
        widgets: scene.widgets.clone(),
        content: scene.content.clone(),
        bindings: scene.bindings.clone(),
        sim: scene.sim.clone(),
    };
    (doc, files)
}

/// Validates and writes the scene and its mesh files. Every file is written
/// atomically; mesh files are written before the scene document.
pub fn save_scene(scene: &IdiScene, path: &Path) -> Result<(), FormatError> {
    let violations = scene.validate();
    if !violations.is_empty() {
        return Err(FormatError::ValidationFailure(violations));
    }
    let dir = parent_dir(path);
    let mesh_dir = mesh_dir_name(path);
    let (doc, files) = to_document(scene, &mesh_dir);
    let bytes = canonical_json(&doc)?;
    fs::create_dir_all(dir.join(&mesh_dir)).map_err(|e| io_err(&dir, e))?;
    for (rel, data) in &files {
        let target = dir.join(rel);
        if fs::read(&target).ok().as_deref() != Some(data.as_slice()) {
            write_atomic(&target, data).map_err(|e| io_err(&target, e))?;
        }
    }
    write_atomic(path, &bytes).map_err(|e| io_err(path, e))?;
    // Meshes of segments that no longer exist.
    let keep: Vec<&str> = files.iter().filter_map(|(r, _)| r.rsplit('/').next()).collect();
    if let Ok(entries) = fs::read_dir(dir.join(&mesh_dir)) {
        for entry in entries.flatten() {
            let name = entry.file_name().to_string_lossy().into_owned();
            if name.ends_with(".obj") && !keep.contains(&name.as_str()) {
                let _ = fs::remove_file(entry.path());
            }
        }
    }
    Ok(())
}

/// Canonical scene-document bytes, exactly as [`save_scene`] writes them.
pub fn scene_bytes(scene: &IdiScene, path: &Path) -> Result<Vec<u8>, FormatError> {
    canonical_json(&to_document(scene, &mesh_dir_name(path)).0)
}

/// Rejects absolute paths and `..` so a scene cannot reach outside its directory.
fn safe_relative(rel: &str) -> Result<PathBuf, FormatError> {
    let p = Path::new(rel);
    let ok = !rel.is_empty() && p.components().all(|c| matches!(c, Component::Normal(_) | Component::CurDir));
    if ok {
        Ok(p.to_path_buf())
    } else {
        Err(FormatError::ParseError(format!("mesh path {rel:?} must be relative and stay inside the scene directory")))
    }
}

/// Parses a scene document and resolves its mesh files relative to `dir`.
pub fn from_bytes(bytes: &[u8], dir: &Path) -> Result<IdiScene, FormatError> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| FormatError::ParseError(e.to_string()))?;
    match value.get("version") {
        Some(Value::String(v)) if v != FORMAT_VERSION => return Err(FormatError::UnknownVersion(v.clone())),
        Some(Value::String(_)) => {}
        Some(other) => return Err(FormatError::UnknownVersion(other.to_string())),
        None => return Err(FormatError::ParseError("missing \"version\"".into())),
    }
    let doc: SceneDocument = serde_json::from_value(value).map_err(|e| FormatError::ParseError(e.to_string()))?;

    let mut segments = Vec::with_capacity(doc.segments.len());
    for rec in doc.segments {
        let rel = safe_relative(&rec.mesh.path)?;
        let full = dir.join(&rel);
        let data = fs::read(&full).map_err(|e| io_err(&full, e))?;
        let actual = sha256_hex(&data);
        if actual != rec.mesh.sha256 {
            return Err(FormatError::ChecksumMismatch { path: rec.mesh.path, expected: rec.mesh.sha256, actual });
        }
        let text =
            std::str::from_utf8(&data).map_err(|_| FormatError::ParseError(format!("{}: not UTF-8", rec.mesh.path)))?;
        let mesh = parse_obj(text).map_err(|e| FormatError::ParseError(format!("{}: {e}", rec.mesh.path)))?;
        if mesh.triangle_count() != rec.mesh.triangles {
            return Err(FormatError::ParseError(format!(
                "{}: {} triangles, document says {}",
                rec.mesh.path,
                mesh.triangle_count(),
                rec.mesh.triangles
            )));
        }
        segments.push(Segment { id: rec.id, label: rec.label, provenance: rec.provenance, mesh: Arc::new(mesh) });
    }
    let scene = IdiScene {
        version: doc.version,
        name: doc.name,
        segments,
        joints: doc.joints,
        widgets: doc.widgets,
        content: doc.content,
        bindings: doc.bindings,
        sim: doc.sim,
    };
    let violations = scene.validate();
    if !violations.is_empty() {
        return Err(FormatError::ValidationFailure(violations));
    }
    Ok(scene)
}

/// Reads, checksums and validates a scene file.
pub fn load_scene(path: &Path) -> Result<IdiScene, FormatError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    from_bytes(&bytes, &parent_dir(path))
}
