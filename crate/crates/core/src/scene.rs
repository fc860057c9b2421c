//! The in-memory IDI scene: segments, joints, widgets, content and bindings.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::sync::Arc;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::content::{BindingRole, BindingTarget, ContentBinding, ContentItem, ContentKind};
use crate::ids::{ContentId, JointId, SegmentId, WidgetId};
use crate::mesh::TriMesh;
use crate::physics::{JointSpec, JointType};
use crate::slicer::{self, CutPlane, Provenance, SegmentLabel, SegmentSet, SliceError};
use crate::spectral::{self, SegmentParams, Segmentation, SpectralError};
use crate::widgets::{WidgetCategory, WidgetSpec};

pub const FORMAT_VERSION: &str = "1.0";

/// Largest allowed distance between a joint anchor and either segment's surface.
/// Accepted fixed-step range, seconds.
pub const MIN_DT: f64 = 1e-5;
pub const MAX_DT: f64 = 0.1;
pub const ANCHOR_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub id: SegmentId,
    pub label: SegmentLabel,
    pub provenance: Provenance,
    pub mesh: Arc<TriMesh>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub gravity: Vector3<f64>,
    pub ground_plane: bool,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { dt: 1.0 / 120.0, gravity: Vector3::new(0.0, -9.81, 0.0), ground_plane: false, seed: 42 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdiScene {
    pub version: String,
    pub name: String,
    pub segments: Vec<Segment>,
    pub joints: Vec<JointSpec>,
    pub widgets: Vec<WidgetSpec>,
    /// Catalog entries for every content item the scene references.
    pub content: Vec<ContentItem>,
    pub bindings: Vec<ContentBinding>,
    pub sim: SimConfig,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("unknown segment {0}")]
    UnknownSegment(SegmentId),
    #[error("segment {segment} is referenced by {by}")]
    SegmentInUse { segment: SegmentId, by: String },
    #[error(transparent)]
    Slice(#[from] SliceError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// One failed scene invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Short machine-readable code, e.g. `DanglingReference`.
    pub code: String,
    /// Id of the offending object (joint, widget, binding index, ...).
    pub subject: String,
    pub message: String,
}

impl Violation {
    fn new(code: &str, subject: impl fmt::Display, message: impl Into<String>) -> Self {
        Self { code: code.into(), subject: subject.to_string(), message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]: {}", self.code, self.subject, self.message)
    }
}

impl IdiScene {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            version: FORMAT_VERSION.into(),
            name: name.into(),
            segments: Vec::new(),
            joints: Vec::new(),
            widgets: Vec::new(),
            content: Vec::new(),
            bindings: Vec::new(),
            sim: SimConfig::default(),
        }
    }

    /// A scene holding `mesh` as its single imported segment.
    pub fn from_mesh(name: impl Into<String>, mesh: TriMesh) -> Self {
        let mut scene = Self::new(name);
        scene.add_segment(SegmentLabel::Whole, Provenance::Imported, mesh);
        scene
    }

    pub fn segment(&self, id: &SegmentId) -> Option<&Segment> {
        self.segments.iter().find(|s| &s.id == id)
    }

    pub fn joint(&self, id: &JointId) -> Option<&JointSpec> {
        self.joints.iter().find(|j| &j.id == id)
    }

    pub fn widget(&self, id: &WidgetId) -> Option<&WidgetSpec> {
        self.widgets.iter().find(|w| &w.id == id)
    }

    pub fn widget_mut(&mut self, id: &WidgetId) -> Option<&mut WidgetSpec> {
        self.widgets.iter_mut().find(|w| &w.id == id)
    }

    pub fn content_item(&self, id: &ContentId) -> Option<&ContentItem> {
        self.content.iter().find(|c| &c.id == id)
    }

    pub fn add_segment(&mut self, label: SegmentLabel, provenance: Provenance, mesh: TriMesh) -> SegmentId {
        let id = SegmentId::next(self.segments.iter().map(|s| &s.id));
        self.segments.push(Segment { id: id.clone(), label, provenance, mesh: Arc::new(mesh) });
        id
    }

    /// Describes what refers to `segment`, or `None` if nothing does.
    pub fn references_to(&self, segment: &SegmentId) -> Option<String> {
        if let Some(j) = self.joints.iter().find(|j| &j.base == segment || &j.movable == segment) {
            return Some(format!("joint {}", j.id));
        }
        if let Some(w) = self.widgets.iter().find(|w| w.host.as_ref() == Some(segment)) {
            return Some(format!("widget {}", w.id));
        }
        if self.bindings.iter().any(|b| b.target == BindingTarget::Segment(segment.clone())) {
            return Some("a content binding".into());
        }
        None
    }

    /// Replaces segment `id` with the parts of `set`, in place. Returns the new ids.
    pub fn replace_segment(&mut self, id: &SegmentId, set: SegmentSet) -> Result<Vec<SegmentId>, SceneError> {
        let pos =
            self.segments.iter().position(|s| &s.id == id).ok_or_else(|| SceneError::UnknownSegment(id.clone()))?;
        if let Some(by) = self.references_to(id) {
            return Err(SceneError::SegmentInUse { segment: id.clone(), by });
        }
        // Ids are allocated before removal so a replaced id is never reused.
        let mut ids = Vec::with_capacity(set.parts.len());
        let mut new = Vec::with_capacity(set.parts.len());
        for part in set.parts {
            let nid = SegmentId::next(self.segments.iter().map(|s| &s.id).chain(ids.iter()));
            ids.push(nid.clone());
            new.push(Segment { id: nid, label: part.label, provenance: set.provenance, mesh: Arc::new(part.mesh) });
        }
        self.segments.splice(pos..=pos, new);
        Ok(ids)
    }

    /// Cuts a segment with a plane; the two halves take its place.
    pub fn slice_segment(&mut self, id: &SegmentId, plane: &CutPlane) -> Result<Vec<SegmentId>, SceneError> {
        let seg = self.segment(id).ok_or_else(|| SceneError::UnknownSegment(id.clone()))?;
        if let Some(by) = self.references_to(id) {
            return Err(SceneError::SegmentInUse { segment: id.clone(), by });
        }
        let set = slicer::slice_by_plane(&seg.mesh, plane)?;
        self.replace_segment(id, set)
    }

    /// Splits a segment into its edge-connected components.
    pub fn split_segment(&mut self, id: &SegmentId) -> Result<Vec<SegmentId>, SceneError> {
        let seg = self.segment(id).ok_or_else(|| SceneError::UnknownSegment(id.clone()))?;
        let set = slicer::split_disconnected(&seg.mesh);
        self.replace_segment(id, set)
    }

    /// Spectral segmentation of one segment; the clusters take its place.
    pub fn segment_spectral(
        &mut self,
        id: &SegmentId,
        params: &SegmentParams,
    ) -> Result<(Segmentation, Vec<SegmentId>), SceneError> {
        let seg = self.segment(id).ok_or_else(|| SceneError::UnknownSegment(id.clone()))?;
        if let Some(by) = self.references_to(id) {
            return Err(SceneError::SegmentInUse { segment: id.clone(), by });
        }
        let mesh = seg.mesh.clone();
        let result = spectral::segment(&mesh, params)?;
        let set = spectral::segments_from_labels(&mesh, &result);
        let ids = self.replace_segment(id, set)?;
        Ok((result, ids))
    }

    /// Removes a segment together with the joints, widgets and bindings that
    /// reference it.
    pub fn remove_segment(&mut self, id: &SegmentId) -> Result<(), SceneError> {
        let pos =
            self.segments.iter().position(|s| &s.id == id).ok_or_else(|| SceneError::UnknownSegment(id.clone()))?;
        self.segments.remove(pos);
        self.joints.retain(|j| &j.base != id && &j.movable != id);
        let hosted = |w: &WidgetSpec| w.host.as_ref() == Some(id);
        let gone: Vec<WidgetId> = self.widgets.iter().filter(|w| hosted(w)).map(|w| w.id.clone()).collect();
        self.widgets.retain(|w| !hosted(w));
        self.bindings.retain(|b| match &b.target {
            BindingTarget::Segment(s) => s != id,
            BindingTarget::Widget(w) => !gone.contains(w),
            BindingTarget::Scene => true,
        });
        Ok(())
    }

    /// Checks every scene invariant and returns all violations found.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.version != FORMAT_VERSION {
            out.push(Violation::new("UnknownVersion", &self.version, "unrecognized format version"));
        }
        if !(MIN_DT..=MAX_DT).contains(&self.sim.dt) {
            out.push(Violation::new(
                "InvalidSimConfig",
                "sim",
                format!("dt must lie in [{MIN_DT}, {MAX_DT}] s, got {}", self.sim.dt),
            ));
        }
        if !self.sim.gravity.iter().all(|g| g.is_finite()) {
            out.push(Violation::new("InvalidSimConfig", "sim", "gravity must be finite"));
        }

        duplicates(self.segments.iter().map(|s| s.id.as_str()), "segment", &mut out);
        duplicates(self.joints.iter().map(|j| j.id.as_str()), "joint", &mut out);
        duplicates(self.widgets.iter().map(|w| w.id.as_str()), "widget", &mut out);
        duplicates(self.content.iter().map(|c| c.id.as_str()), "content", &mut out);

        for s in &self.segments {
            if s.mesh.is_empty() {
                out.push(Violation::new("EmptySegment", &s.id, "segment mesh has no triangles"));
            }
        }
        self.validate_joints(&mut out);
        self.validate_widgets(&mut out);
        self.validate_bindings(&mut out);
        out
    }

    fn validate_joints(&self, out: &mut Vec<Violation>) {
        let mut pairs = HashSet::new();
        for j in &self.joints {
            let base = self.segment(&j.base);
            let movable = self.segment(&j.movable);
            if base.is_none() {
                out.push(Violation::new("DanglingReference", &j.id, format!("base segment {} does not exist", j.base)));
            }
            if movable.is_none() {
                out.push(Violation::new(
                    "DanglingReference",
                    &j.id,
                    format!("movable segment {} does not exist", j.movable),
                ));
            }
            if j.base == j.movable {
                out.push(Violation::new("InvalidJoint", &j.id, "base and movable are the same segment"));
            }
            if let Err(e) = j.axes.check_orthonormal() {
                out.push(Violation::new("InvalidJoint", &j.id, e));
            }
            if !j.anchor.iter().all(|v| v.is_finite()) {
                out.push(Violation::new("InvalidJoint", &j.id, "anchor is not finite"));
            }
            if let Some(l) = &j.limits {
                if let Err(e) = l.check() {
                    out.push(Violation::new("InvalidJoint", &j.id, e));
                }
            }
            for (seg, role) in [(base, "base"), (movable, "movable")] {
                if let Some(seg) = seg {
                    let d = seg.mesh.closest_point(&j.anchor).map_or(f64::INFINITY, |(_, _, d2)| d2.sqrt());
                    if d > ANCHOR_TOLERANCE {
                        out.push(Violation::new(
                            "InvalidJoint",
                            &j.id,
                            format!("anchor is {d:.4} m from the {role} segment {}", seg.id),
                        ));
                    }
                }
            }
            let key = (j.base.clone(), j.movable.clone(), anchor_key(j));
            if !pairs.insert(key) {
                out.push(Violation::new("DuplicateJoint", &j.id, "same base, movable and anchor as another joint"));
            }
        }
        if let Some(seg) = base_chain_cycle(&self.joints) {
            out.push(Violation::new("CyclicBaseChain", seg, "joint base chain forms a cycle"));
        }
    }

    fn validate_widgets(&self, out: &mut Vec<Violation>) {
        for w in &self.widgets {
            if let Some(host) = &w.host {
                if self.segment(host).is_none() {
                    out.push(Violation::new("DanglingReference", &w.id, format!("host segment {host} does not exist")));
                }
            }
            if let Err(e) = w.check() {
                out.push(Violation::new("InvalidWidget", &w.id, e.to_string()));
            }
        }
    }

    fn validate_bindings(&self, out: &mut Vec<Violation>) {
        let mut seen = HashSet::new();
        for (i, b) in self.bindings.iter().enumerate() {
            let subject = format!("binding{i}");
            if !seen.insert(b) {
                out.push(Violation::new("DuplicateBinding", &subject, "binding listed twice"));
            }
            let item = self.content_item(&b.content);
            if item.is_none() {
                out.push(Violation::new(
                    "DanglingReference",
                    &subject,
                    format!("content {} does not exist", b.content),
                ));
            }
            match &b.target {
                BindingTarget::Scene => {}
                BindingTarget::Segment(s) => {
                    if self.segment(s).is_none() {
                        out.push(Violation::new(
                            "DanglingReference",
                            &subject,
                            format!("target segment {s} does not exist"),
                        ));
                    }
                }
                BindingTarget::Widget(w) => match self.widget(w) {
                    None => out.push(Violation::new(
                        "DanglingReference",
                        &subject,
                        format!("target widget {w} does not exist"),
                    )),
                    Some(w) => {
                        if b.role == BindingRole::PlaybackSource && w.category == WidgetCategory::Screen {
                            out.push(Violation::new(
                                "RoleMismatch",
                                &subject,
                                "playback sources bind to input widgets, not screens",
                            ));
                        }
                    }
                },
            }
            if let Some(item) = item {
                if b.role == BindingRole::PlaybackSource && item.kind == ContentKind::Text {
                    out.push(Violation::new("RoleMismatch", &subject, "text content cannot be a playback source"));
                }
            }
        }
    }

    /// Segments whose rigid body is simulated: movables of at least one joint.
    pub fn dynamic_segments(&self) -> BTreeSet<SegmentId> {
        self.joints.iter().map(|j| j.movable.clone()).collect()
    }

    /// Joint types keyed by id, handy for summaries.
    pub fn joint_types(&self) -> BTreeMap<JointId, JointType> {
        self.joints.iter().map(|j| (j.id.clone(), j.joint_type)).collect()
    }
}

fn duplicates<'a>(ids: impl Iterator<Item = &'a str>, kind: &str, out: &mut Vec<Violation>) {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            out.push(Violation::new("DuplicateId", id, format!("{kind} id used more than once")));
        }
    }
}

pub(crate) fn anchor_key(j: &JointSpec) -> [u64; 3] {
    [j.anchor.x.to_bits(), j.anchor.y.to_bits(), j.anchor.z.to_bits()]
}

/// Returns a segment on a base→movable cycle, if any.
pub(crate) fn base_chain_cycle(joints: &[JointSpec]) -> Option<SegmentId> {
    let mut children: BTreeMap<&SegmentId, Vec<&SegmentId>> = BTreeMap::new();
    for j in joints {
        children.entry(&j.base).or_default().push(&j.movable);
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state: BTreeMap<&SegmentId, u8> = BTreeMap::new();
    for &start in children.keys() {
        if state.get(start).copied().unwrap_or(0) != 0 {
            continue;
        }
        let mut stack: Vec<(&SegmentId, usize)> = vec![(start, 0)];
        state.insert(start, 1);
        while let Some((node, next)) = stack.last_mut() {
            let kids = children.get(*node).map(Vec::as_slice).unwrap_or(&[]);
            if *next < kids.len() {
                let child = kids[*next];
                *next += 1;
                match state.get(child).copied().unwrap_or(0) {
                    1 => return Some(child.clone()),
                    0 => {
                        state.insert(child, 1);
                        stack.push((child, 0));
                    }
                    _ => {}
                }
            } else {
                state.insert(*node, 2);
                stack.pop();
            }
        }
    }
    None
}
