//! Interface widgets: knobs, screens, sliders and buttons attached to segments.
//!
//! Widgets never hold media themselves. Playback sources are found through
//! the scene's content bindings: first those on the widget, then those on
//! its host segment, then scene-wide ones.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Point3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::content::{BindingRole, BindingTarget};
use crate::ids::{ContentId, SegmentId, WidgetId};
use crate::mesh::{shapes, TriMesh};
use crate::physics::SimState;
use crate::scene::IdiScene;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WidgetError {
    #[error("unknown widget {0}")]
    UnknownWidget(WidgetId),
    #[error("unknown segment {0}")]
    UnknownSegment(SegmentId),
    #[error("{category} widget {widget} does not accept {kind} events")]
    EventKindMismatch { widget: WidgetId, category: WidgetCategory, kind: String },
    #[error("invalid subtype: {0}")]
    InvalidSubtype(String),
    #[error("invalid placement: {0}")]
    InvalidPlacement(String),
    #[error("invalid event: {0}")]
    InvalidEvent(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WidgetCategory {
    Knob,
    Screen,
    Slider,
    Button,
}

impl WidgetCategory {
    pub const ALL: [WidgetCategory; 4] =
        [WidgetCategory::Knob, WidgetCategory::Screen, WidgetCategory::Slider, WidgetCategory::Button];

    pub fn name(self) -> &'static str {
        match self {
            WidgetCategory::Knob => "knob",
            WidgetCategory::Screen => "screen",
            WidgetCategory::Slider => "slider",
            WidgetCategory::Button => "button",
        }
    }

    /// Half extents of the box hit region (knobs: radius, half height, radius).
    fn half_extents(self) -> Vector3<f64> {
        match self {
            WidgetCategory::Knob => Vector3::new(0.02, 0.01, 0.02),
            WidgetCategory::Button => Vector3::new(0.015, 0.008, 0.015),
            WidgetCategory::Slider => Vector3::new(0.04, 0.006, 0.008),
            WidgetCategory::Screen => Vector3::new(0.08, 0.002, 0.06),
        }
    }
}

impl fmt::Display for WidgetCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WidgetCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown widget category '{s}' (expected knob, screen, slider or button)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScreenSubtype {
    Display,
    Viewfinder,
}

impl FromStr for ScreenSubtype {
    type Err = WidgetError;

    fn from_str(s: &str) -> Result<Self, WidgetError> {
        match s.to_ascii_lowercase().as_str() {
            "display" => Ok(ScreenSubtype::Display),
            "viewfinder" => Ok(ScreenSubtype::Viewfinder),
            _ => Err(WidgetError::InvalidSubtype(format!("'{s}' (screens are display or viewfinder)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KnobMode {
    #[default]
    Detented,
    Continuous,
}

/// Pose of a widget. Attached widgets are placed relative to the center of
/// their host segment's bounding box in its rest placement; unattached ones
/// in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
    pub scale: f64,
}

impl Default for Placement {
    fn default() -> Self {
        Self { position: Vector3::zeros(), orientation: UnitQuaternion::identity(), scale: 1.0 }
    }
}

impl Placement {
    pub fn at(position: Vector3<f64>) -> Self {
        Self { position, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidgetSpec {
    pub id: WidgetId,
    pub category: WidgetCategory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subtype: Option<ScreenSubtype>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub host: Option<SegmentId>,
    pub placement: Placement,
    pub visible: bool,
    /// Free-form action name echoed in effects, for hosts that wire widgets
    /// to something other than content playback.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    /// Knob detent count; defaults to the number of bound items.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detents: Option<u32>,
    #[serde(default)]
    pub mode: KnobMode,
}

impl WidgetSpec {
    pub fn check(&self) -> Result<(), WidgetError> {
        match (self.category, self.subtype) {
            (WidgetCategory::Screen, None) => {
                return Err(WidgetError::InvalidSubtype("screens need a display or viewfinder subtype".into()))
            }
            (c, Some(_)) if c != WidgetCategory::Screen => {
                return Err(WidgetError::InvalidSubtype(format!("{c} widgets have no subtype")))
            }
            _ => {}
        }
        let p = &self.placement;
        if !(p.scale.is_finite() && p.scale > 0.0) {
            return Err(WidgetError::InvalidPlacement(format!("scale must be positive, got {}", p.scale)));
        }
        if !p.position.iter().all(|v| v.is_finite()) || !p.orientation.coords.iter().all(|v| v.is_finite()) {
            return Err(WidgetError::InvalidPlacement("non-finite pose".into()));
        }
        if (p.orientation.coords.norm() - 1.0).abs() > 1e-6 {
            return Err(WidgetError::InvalidPlacement("orientation is not a unit quaternion".into()));
        }
        if self.detents == Some(0) {
            return Err(WidgetError::InvalidPlacement("knobs need at least one detent".into()));
        }
        Ok(())
    }

    /// Built-in geometry: cylinder knob, box button, rail slider, quad screen.
    /// In widget-local coordinates, facing +y.
    pub fn geometry(&self) -> TriMesh {
        let h = self.category.half_extents() * self.placement.scale;
        match self.category {
            WidgetCategory::Knob => shapes::revolve(&[(0.0, -h.y), (h.x, -h.y), (h.x, h.y), (0.0, h.y)], 24),
            _ => shapes::cuboid(Point3::origin(), h * 2.0),
        }
    }

    /// Whether a widget-local point lies in the hit region.
    fn contains_local(&self, p: &Point3<f64>) -> bool {
        let h = self.category.half_extents() * self.placement.scale;
        match self.category {
            WidgetCategory::Knob => p.x * p.x + p.z * p.z <= h.x * h.x && p.y.abs() <= h.y,
            _ => p.x.abs() <= h.x && p.y.abs() <= h.y && p.z.abs() <= h.z,
        }
    }
}

/// World pose of a widget for the given simulation state.
pub fn widget_pose(scene: &IdiScene, state: &SimState, widget: &WidgetSpec) -> (Point3<f64>, UnitQuaternion<f64>) {
    let p = &widget.placement;
    let Some(host) = widget.host.as_ref().and_then(|h| scene.segment(h)) else {
        return (Point3::from(p.position), p.orientation);
    };
    let rest = host.mesh.bbox().center() + p.position;
    match state.body(&host.id) {
        Some(body) => (body.to_world(&rest), body.orientation * p.orientation),
        None => (rest, p.orientation),
    }
}

/// First widget whose hit region contains `point`. Visibility is ignored:
/// hidden widgets keep working.
pub fn hit_test(scene: &IdiScene, state: &SimState, point: &Point3<f64>) -> Option<WidgetId> {
    scene.widgets.iter().find_map(|w| {
        let (origin, rot) = widget_pose(scene, state, w);
        let local = Point3::from(rot.inverse() * (point - origin));
        w.contains_local(&local).then(|| w.id.clone())
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WidgetEventKind {
    Press,
    Release,
    Drag { value: f64 },
    Rotate { angle: f64 },
}

impl WidgetEventKind {
    pub fn name(&self) -> &'static str {
        match self {
            WidgetEventKind::Press => "press",
            WidgetEventKind::Release => "release",
            WidgetEventKind::Drag { .. } => "drag",
            WidgetEventKind::Rotate { .. } => "rotate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidgetEvent {
    pub time: f64,
    pub widget: WidgetId,
    #[serde(flatten)]
    pub kind: WidgetEventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EffectAction {
    Play,
    Pause,
    Select,
    SetVolume,
    /// Continuous knob position, parameter in [0, 1).
    Rotate,
    Release,
    /// Button press with no playback source.
    Trigger,
}

impl fmt::Display for EffectAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        f.write_str(&s)
    }
}

/// One state transition caused by a widget event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Effect {
    pub time: f64,
    pub widget: WidgetId,
    pub content: Option<ContentId>,
    pub action: EffectAction,
    pub parameter: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Playback {
    pub playing: bool,
    pub volume: f64,
}

impl Default for Playback {
    fn default() -> Self {
        Self { playing: false, volume: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct KnobState {
    /// Accumulated rotation, radians.
    pub angle: f64,
    pub index: Option<u32>,
}

/// Logical media state driven by widgets.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MediaState {
    pub playback: BTreeMap<ContentId, Playback>,
    /// Item most recently selected or started.
    pub current: Option<ContentId>,
    pub knobs: BTreeMap<WidgetId, KnobState>,
    pub sliders: BTreeMap<WidgetId, f64>,
    pub buttons: BTreeMap<WidgetId, bool>,
}

impl MediaState {
    pub fn is_playing(&self, content: &ContentId) -> bool {
        self.playback.get(content).is_some_and(|p| p.playing)
    }
}

/// Orders content ids by numeric suffix, then text.
fn id_order(id: &ContentId) -> (u64, String) {
    let digits: String = id.as_str().chars().rev().take_while(|c| c.is_ascii_digit()).collect();
    let n = digits.chars().rev().collect::<String>().parse().unwrap_or(u64::MAX);
    (n, id.as_str().to_owned())
}

/// Playback items a widget controls, in id order. Widget bindings win over
/// host-segment bindings, which win over scene-wide ones.
pub fn playback_items(scene: &IdiScene, widget: &WidgetSpec) -> Vec<ContentId> {
    let collect = |target: &BindingTarget| -> Vec<ContentId> {
        let mut ids: Vec<ContentId> = scene
            .bindings
            .iter()
            .filter(|b| b.role == BindingRole::PlaybackSource && &b.target == target)
            .map(|b| b.content.clone())
            .collect();
        ids.sort_by_key(id_order);
        ids.dedup();
        ids
    };
    let own = collect(&BindingTarget::Widget(widget.id.clone()));
    if !own.is_empty() {
        return own;
    }
    if let Some(host) = &widget.host {
        let on_host = collect(&BindingTarget::Segment(host.clone()));
        if !on_host.is_empty() {
            return on_host;
        }
    }
    collect(&BindingTarget::Scene)
}

/// Item a button or slider acts on: the current item if it is one of
/// `items`, else the first.
fn target_item(media: &MediaState, items: &[ContentId]) -> Option<ContentId> {
    match &media.current {
        Some(c) if items.contains(c) => Some(c.clone()),
        _ => items.first().cloned(),
    }
}

/// Detent index for an accumulated knob angle.
pub fn detent_index(angle: f64, detents: u32) -> u32 {
    let n = detents.max(1);
    let frac = angle.rem_euclid(TAU) / TAU;
    ((n as f64 * frac + 1e-9).floor() as u64 % n as u64) as u32
}

/// Applies a widget event to the media state and returns the effects.
pub fn dispatch(scene: &IdiScene, media: &mut MediaState, event: &WidgetEvent) -> Result<Vec<Effect>, WidgetError> {
    let w = scene.widget(&event.widget).ok_or_else(|| WidgetError::UnknownWidget(event.widget.clone()))?;
    let legal = matches!(
        (w.category, &event.kind),
        (WidgetCategory::Button, WidgetEventKind::Press | WidgetEventKind::Release)
            | (WidgetCategory::Slider, WidgetEventKind::Drag { .. })
            | (WidgetCategory::Knob, WidgetEventKind::Rotate { .. })
    );
    if !legal {
        return Err(WidgetError::EventKindMismatch {
            widget: w.id.clone(),
            category: w.category,
            kind: event.kind.name().into(),
        });
    }
    if !event.time.is_finite() {
        return Err(WidgetError::InvalidEvent("time is not finite".into()));
    }
    let effect = |content: Option<ContentId>, action: EffectAction, parameter: Option<f64>| Effect {
        time: event.time,
        widget: w.id.clone(),
        content,
        action,
        parameter,
        note: w.action.clone(),
    };
    let items = playback_items(scene, w);
    let out = match event.kind {
        WidgetEventKind::Press => {
            media.buttons.insert(w.id.clone(), true);
            match target_item(media, &items) {
                None => effect(None, EffectAction::Trigger, None),
                Some(item) => {
                    let pb = media.playback.entry(item.clone()).or_default();
                    pb.playing = !pb.playing;
                    let action = if pb.playing { EffectAction::Play } else { EffectAction::Pause };
                    media.current = Some(item.clone());
                    effect(Some(item), action, None)
                }
            }
        }
        WidgetEventKind::Release => {
            media.buttons.insert(w.id.clone(), false);
            effect(None, EffectAction::Release, None)
        }
        WidgetEventKind::Drag { value } => {
            if value.is_nan() {
                return Err(WidgetError::InvalidEvent("drag value is NaN".into()));
            }
            let v = value.clamp(0.0, 1.0);
            media.sliders.insert(w.id.clone(), v);
            let item = target_item(media, &items);
            if let Some(item) = &item {
                media.playback.entry(item.clone()).or_default().volume = v;
            }
            effect(item, EffectAction::SetVolume, Some(v))
        }
        WidgetEventKind::Rotate { angle } => {
            if !angle.is_finite() {
                return Err(WidgetError::InvalidEvent("rotation angle is not finite".into()));
            }
            let knob = media.knobs.entry(w.id.clone()).or_default();
            knob.angle = (knob.angle + angle).rem_euclid(TAU);
            match w.mode {
                KnobMode::Continuous => {
                    let frac = knob.angle / TAU;
                    effect(None, EffectAction::Rotate, Some(frac))
                }
                KnobMode::Detented => {
                    let n = w.detents.unwrap_or(items.len() as u32).max(1);
                    let idx = detent_index(knob.angle, n);
                    knob.index = Some(idx);
                    let item = items.get(idx as usize).cloned();
                    if item.is_some() {
                        media.current = item.clone();
                    }
                    effect(item, EffectAction::Select, Some(idx as f64))
                }
            }
        }
    };
    Ok(vec![out])
}

/// [`dispatch`] against the media state carried by a simulation state.
pub fn dispatch_event(scene: &IdiScene, state: &mut SimState, event: &WidgetEvent) -> Result<Vec<Effect>, WidgetError> {
    dispatch(scene, &mut state.media, event)
}

/// What a screen shows: the current item if it is a picture or video, or a
/// camera placeholder for viewfinders.
pub fn screen_source(scene: &IdiScene, media: &MediaState, widget: &WidgetSpec) -> Option<String> {
    match widget.subtype? {
        ScreenSubtype::Viewfinder => Some("camera-placeholder".into()),
        ScreenSubtype::Display => {
            let current = media.current.as_ref()?;
            let item = scene.content_item(current)?;
            matches!(item.kind, crate::content::ContentKind::Video | crate::content::ContentKind::Picture)
                .then(|| current.to_string())
        }
    }
}

impl IdiScene {
    /// Adds a visible, unbound widget. Screens default to the display subtype.
    pub fn spawn_widget(
        &mut self,
        category: WidgetCategory,
        subtype: Option<ScreenSubtype>,
        placement: Placement,
    ) -> Result<WidgetId, WidgetError> {
        let subtype = match (category, subtype) {
            (WidgetCategory::Screen, None) => Some(ScreenSubtype::Display),
            (_, s) => s,
        };
        let id = WidgetId::next(self.widgets.iter().map(|w| &w.id));
        let spec = WidgetSpec {
            id: id.clone(),
            category,
            subtype,
            host: None,
            placement,
            visible: true,
            action: None,
            detents: None,
            mode: KnobMode::default(),
        };
        spec.check()?;
        self.widgets.push(spec);
        Ok(id)
    }

    /// Attaches a widget to a segment, keeping its rest-pose world position.
    pub fn attach_widget(&mut self, widget: &WidgetId, segment: &SegmentId) -> Result<(), WidgetError> {
        let new_center =
            self.segment(segment).ok_or_else(|| WidgetError::UnknownSegment(segment.clone()))?.mesh.bbox().center();
        let old_center = {
            let w = self.widget(widget).ok_or_else(|| WidgetError::UnknownWidget(widget.clone()))?;
            w.host.as_ref().and_then(|h| self.segment(h)).map(|s| s.mesh.bbox().center())
        };
        let w = self.widget_mut(widget).expect("checked above");
        let world = old_center.map_or(Point3::origin(), |c| c) + w.placement.position;
        w.placement.position = world - new_center;
        w.host = Some(segment.clone());
        Ok(())
    }

    pub fn set_visibility(&mut self, widget: &WidgetId, visible: bool) -> Result<(), WidgetError> {
        self.widget_mut(widget).ok_or_else(|| WidgetError::UnknownWidget(widget.clone()))?.visible = visible;
        Ok(())
    }

    /// Removes a widget and every binding that targets it.
    pub fn remove_widget(&mut self, widget: &WidgetId) -> Result<WidgetSpec, WidgetError> {
        let pos = self
            .widgets
            .iter()
            .position(|w| &w.id == widget)
            .ok_or_else(|| WidgetError::UnknownWidget(widget.clone()))?;
        self.bindings.retain(|b| b.target != BindingTarget::Widget(widget.clone()));
        Ok(self.widgets.remove(pos))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn detents_quantize_evenly() {
        assert_eq!(detent_index(2.0 * PI / 3.0, 3), 1);
        assert_eq!(detent_index(0.0, 3), 0);
        assert_eq!(detent_index(-0.1, 3), 2);
        assert_eq!(detent_index(4.0 * PI / 3.0, 3), 2);
        assert_eq!(detent_index(2.0 * PI, 3), 0);
    }

    #[test]
    fn event_json_shape() {
        let e: WidgetEvent =
            serde_json::from_str(r#"{"time":1.5,"widget":"widget0","kind":"rotate","angle":2.0}"#).unwrap();
        assert_eq!(e.kind, WidgetEventKind::Rotate { angle: 2.0 });
        let back = serde_json::to_value(&e).unwrap();
        assert_eq!(back["kind"], "rotate");
    }

    #[test]
    fn content_ids_sort_numerically() {
        let mut ids = [ContentId::new("content10"), ContentId::new("content2")];
        ids.sort_by_key(id_order);
        assert_eq!(ids[0].as_str(), "content2");
    }
}
