//! Embedded content: a content-addressed store and scene bindings.
//!
//! Bytes live in `content/<sha256>.<ext>` beside the scene file, listed in
//! `content/index.json`. Scenes keep only the catalog entries they use.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{ContentId, SegmentId, WidgetId};
use crate::scene::IdiScene;
use crate::util::{sha256_hex, write_atomic};
use crate::widgets::WidgetCategory;

pub const CONTENT_DIR: &str = "content";
pub const INDEX_FILE: &str = "index.json";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContentError {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("unknown content {0}")]
    UnknownContent(ContentId),
    #[error("unknown binding target {0}")]
    UnknownTarget(String),
    #[error("role mismatch: {0}")]
    RoleMismatch(String),
    #[error("checksum mismatch for {path}: expected {expected}, found {actual}")]
    ChecksumMismatch { path: String, expected: String, actual: String },
    #[error("content catalog: {0}")]
    Catalog(String),
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContentKind {
    Audio,
    Video,
    Picture,
    Text,
}

impl ContentKind {
    pub fn from_extension(ext: &str) -> Option<Self> {
        Some(match ext.to_ascii_lowercase().as_str() {
            "mp3" | "wav" => ContentKind::Audio,
            "mp4" => ContentKind::Video,
            "png" | "jpg" | "jpeg" => ContentKind::Picture,
            "txt" | "md" => ContentKind::Text,
            _ => return None,
        })
    }
}

impl fmt::Display for ContentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContentKind::Audio => "audio",
            ContentKind::Video => "video",
            ContentKind::Picture => "picture",
            ContentKind::Text => "text",
        })
    }
}

impl FromStr for ContentKind {
    type Err = ContentError;

    fn from_str(s: &str) -> Result<Self, ContentError> {
        match s.to_ascii_lowercase().as_str() {
            "audio" => Ok(ContentKind::Audio),
            "video" => Ok(ContentKind::Video),
            "picture" | "image" => Ok(ContentKind::Picture),
            "text" => Ok(ContentKind::Text),
            _ => Err(ContentError::UnsupportedFormat(format!("unknown content kind '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ContentMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width_px: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height_px: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentItem {
    pub id: ContentId,
    pub kind: ContentKind,
    /// Path the item was imported from, as given.
    pub source: String,
    /// Stored copy, relative to the directory holding the scene.
    pub file: String,
    pub size: u64,
    /// SHA-256 of the bytes, lowercase hex.
    pub checksum: String,
    #[serde(default)]
    pub metadata: ContentMetadata,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "lowercase")]
pub enum BindingTarget {
    Scene,
    Segment(SegmentId),
    Widget(WidgetId),
}

impl fmt::Display for BindingTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BindingTarget::Scene => f.write_str("scene"),
            BindingTarget::Segment(s) => write!(f, "segment:{s}"),
            BindingTarget::Widget(w) => write!(f, "widget:{w}"),
        }
    }
}

impl FromStr for BindingTarget {
    type Err = String;

    /// `scene`, `segment:<id>` or `widget:<id>`.
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "scene" {
            return Ok(BindingTarget::Scene);
        }
        match s.split_once(':') {
            Some(("segment", id)) if !id.is_empty() => Ok(BindingTarget::Segment(SegmentId::new(id))),
            Some(("widget", id)) if !id.is_empty() => Ok(BindingTarget::Widget(WidgetId::new(id))),
            _ => Err(format!("bad target '{s}' (expected scene, segment:<id> or widget:<id>)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BindingRole {
    PlaybackSource,
    Annotation,
}

impl FromStr for BindingRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "playback-source" | "playback" => Ok(BindingRole::PlaybackSource),
            "annotation" => Ok(BindingRole::Annotation),
            _ => Err(format!("unknown role '{s}' (expected playback-source or annotation)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContentBinding {
    pub content: ContentId,
    pub target: BindingTarget,
    pub role: BindingRole,
}

/// Reads a file and describes it: kind, size, checksum and header metadata.
/// The returned item has an empty id and `file`.
pub fn inspect(path: &Path, hint: Option<ContentKind>) -> Result<(ContentItem, Vec<u8>), ContentError> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    let kind = match hint {
        Some(k) => k,
        None => ContentKind::from_extension(&ext)
            .ok_or_else(|| ContentError::UnsupportedFormat(format!("no content kind for '{}'", path.display())))?,
    };
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => ContentError::FileNotFound(path.display().to_string()),
        _ => ContentError::Io(format!("{}: {e}", path.display())),
    })?;
    let item = ContentItem {
        id: ContentId::new(""),
        kind,
        source: path.display().to_string(),
        file: String::new(),
        size: bytes.len() as u64,
        checksum: sha256_hex(&bytes),
        metadata: sniff_metadata(&bytes),
        annotation: None,
    };
    Ok((item, bytes))
}

/// Duration and pixel size from WAV, PNG and JPEG headers; other formats
/// yield empty metadata.
pub fn sniff_metadata(bytes: &[u8]) -> ContentMetadata {
    png_size(bytes)
        .or_else(|| jpeg_size(bytes))
        .map(|(w, h)| ContentMetadata { width_px: Some(w), height_px: Some(h), ..Default::default() })
        .or_else(|| wav_duration(bytes).map(|d| ContentMetadata { duration_s: Some(d), ..Default::default() }))
        .unwrap_or_default()
}

fn be_u32(b: &[u8], at: usize) -> Option<u32> {
    Some(u32::from_be_bytes(b.get(at..at + 4)?.try_into().ok()?))
}

fn le_u32(b: &[u8], at: usize) -> Option<u32> {
    Some(u32::from_le_bytes(b.get(at..at + 4)?.try_into().ok()?))
}

fn png_size(b: &[u8]) -> Option<(u32, u32)> {
    (b.get(..8)? == b"\x89PNG\r\n\x1a\n" && b.get(12..16)? == b"IHDR").then_some(())?;
    Some((be_u32(b, 16)?, be_u32(b, 20)?))
}

fn jpeg_size(b: &[u8]) -> Option<(u32, u32)> {
    (b.get(..2)? == [0xFF, 0xD8]).then_some(())?;
    let mut i = 2;
    while i + 4 <= b.len() {
        if b[i] != 0xFF {
            return None;
        }
        let marker = b[i + 1];
        if marker == 0xFF {
            i += 1;
            continue;
        }
        let len = u16::from_be_bytes([b[i + 2], b[i + 3]]) as usize;
        let is_sof = (0xC0..=0xCF).contains(&marker) && !matches!(marker, 0xC4 | 0xC8 | 0xCC);
        if is_sof {
            let h = u16::from_be_bytes(b.get(i + 5..i + 7)?.try_into().ok()?);
            let w = u16::from_be_bytes(b.get(i + 7..i + 9)?.try_into().ok()?);
            return Some((w as u32, h as u32));
        }
        if len < 2 {
            return None;
        }
        i += 2 + len;
    }
    None
}

fn wav_duration(b: &[u8]) -> Option<f64> {
    (b.get(..4)? == b"RIFF" && b.get(8..12)? == b"WAVE").then_some(())?;
    let mut i = 12;
    let mut byte_rate = None;
    while i + 8 <= b.len() {
        let id = &b[i..i + 4];
        let size = le_u32(b, i + 4)? as usize;
        if id == b"fmt " {
            byte_rate = le_u32(b, i + 16);
        } else if id == b"data" {
            let rate = byte_rate.filter(|r| *r > 0)?;
            return Some(size as f64 / rate as f64);
        }
        i = i.checked_add(8 + size + (size & 1))?;
    }
    None
}

/// Content-addressed store rooted at a `content/` directory.
#[derive(Debug, Clone)]
pub struct ContentStore {
    root: PathBuf,
    items: Vec<ContentItem>,
}

impl ContentStore {
    /// Opens (or starts) the store in `<scene_dir>/content`.
    pub fn open(scene_dir: &Path) -> Result<Self, ContentError> {
        let root = scene_dir.join(CONTENT_DIR);
        let index = root.join(INDEX_FILE);
        let items = match fs::read(&index) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| ContentError::Catalog(e.to_string()))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(ContentError::Io(e.to_string())),
        };
        Ok(Self { root, items })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn items(&self) -> &[ContentItem] {
        &self.items
    }

    pub fn get(&self, id: &ContentId) -> Option<&ContentItem> {
        self.items.iter().find(|i| &i.id == id)
    }

    /// Copies a file into the store under its checksum and catalogs it with
    /// a fresh id. Importing the same bytes twice stores them once but
    /// yields two items.
    pub fn import(&mut self, path: &Path, hint: Option<ContentKind>) -> Result<ContentItem, ContentError> {
        let (item, bytes) = inspect(path, hint)?;
        self.import_bytes(item, &bytes, path)
    }

    /// Stores bytes received without a file on disk (uploads). `name` gives
    /// the extension and the recorded source.
    pub fn import_named_bytes(
        &mut self,
        name: &str,
        bytes: &[u8],
        hint: Option<ContentKind>,
    ) -> Result<ContentItem, ContentError> {
        let path = Path::new(name);
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
        let kind = match hint {
            Some(k) => k,
            None => ContentKind::from_extension(&ext)
                .ok_or_else(|| ContentError::UnsupportedFormat(format!("no content kind for '{name}'")))?,
        };
        let item = ContentItem {
            id: ContentId::new(""),
            kind,
            source: name.to_owned(),
            file: String::new(),
            size: bytes.len() as u64,
            checksum: sha256_hex(bytes),
            metadata: sniff_metadata(bytes),
            annotation: None,
        };
        self.import_bytes(item, bytes, path)
    }

    fn import_bytes(&mut self, mut item: ContentItem, bytes: &[u8], path: &Path) -> Result<ContentItem, ContentError> {
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("bin").to_ascii_lowercase();
        let name = format!("{}.{}", item.checksum, ext);
        fs::create_dir_all(&self.root).map_err(|e| ContentError::Io(e.to_string()))?;
        let stored = self.root.join(&name);
        if !stored.exists() {
            write_atomic(&stored, bytes).map_err(|e| ContentError::Io(e.to_string()))?;
        }
        item.id = ContentId::next(self.items.iter().map(|i| &i.id));
        item.file = format!("{CONTENT_DIR}/{name}");
        self.items.push(item.clone());
        self.save_index()?;
        Ok(item)
    }

    pub fn save_index(&self) -> Result<(), ContentError> {
        let mut text = serde_json::to_vec_pretty(&self.items).map_err(|e| ContentError::Catalog(e.to_string()))?;
        text.push(b'\n');
        fs::create_dir_all(&self.root).map_err(|e| ContentError::Io(e.to_string()))?;
        write_atomic(&self.root.join(INDEX_FILE), &text).map_err(|e| ContentError::Io(e.to_string()))
    }

    /// Re-hashes a stored item.
    pub fn verify(&self, item: &ContentItem) -> Result<(), ContentError> {
        verify_item(self.root.parent().unwrap_or(Path::new(".")), item)
    }
}

/// Checks that the stored copy of `item` under `scene_dir` still matches its checksum.
pub fn verify_item(scene_dir: &Path, item: &ContentItem) -> Result<(), ContentError> {
    let path = scene_dir.join(&item.file);
    let bytes = fs::read(&path).map_err(|_| ContentError::FileNotFound(path.display().to_string()))?;
    let actual = sha256_hex(&bytes);
    if actual != item.checksum {
        return Err(ContentError::ChecksumMismatch {
            path: item.file.clone(),
            expected: item.checksum.clone(),
            actual,
        });
    }
    Ok(())
}

impl IdiScene {
    /// Adds a catalog entry to the scene (no-op if the id is already present).
    pub fn add_content(&mut self, item: ContentItem) -> ContentId {
        let id = item.id.clone();
        if self.content_item(&id).is_none() {
            self.content.push(item);
        }
        id
    }

    /// Binds content to the scene, a segment or a widget. Binding the same
    /// triple twice is a no-op.
    pub fn bind_content(
        &mut self,
        content: &ContentId,
        target: BindingTarget,
        role: BindingRole,
    ) -> Result<(), ContentError> {
        let item = self.content_item(content).ok_or_else(|| ContentError::UnknownContent(content.clone()))?;
        if role == BindingRole::PlaybackSource && item.kind == ContentKind::Text {
            return Err(ContentError::RoleMismatch("text content cannot be a playback source".into()));
        }
        match &target {
            BindingTarget::Scene => {}
            BindingTarget::Segment(s) => {
                self.segment(s).ok_or_else(|| ContentError::UnknownTarget(target.to_string()))?;
            }
            BindingTarget::Widget(w) => {
                let w = self.widget(w).ok_or_else(|| ContentError::UnknownTarget(target.to_string()))?;
                if role == BindingRole::PlaybackSource && w.category == WidgetCategory::Screen {
                    return Err(ContentError::RoleMismatch(
                        "screens are output sinks; bind playback sources to buttons, knobs or sliders".into(),
                    ));
                }
            }
        }
        let binding = ContentBinding { content: content.clone(), target, role };
        if !self.bindings.contains(&binding) {
            self.bindings.push(binding);
        }
        Ok(())
    }

    pub fn unbind_content(&mut self, binding: &ContentBinding) -> bool {
        let before = self.bindings.len();
        self.bindings.retain(|b| b != binding);
        before != self.bindings.len()
    }

    /// Annotation items bound to `target`.
    pub fn annotations(&self, target: &BindingTarget) -> Vec<&ContentItem> {
        self.bindings
            .iter()
            .filter(|b| b.role == BindingRole::Annotation && &b.target == target)
            .filter_map(|b| self.content_item(&b.content))
            .collect()
    }
}
