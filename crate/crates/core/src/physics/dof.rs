//! Per-DOF motion bookkeeping for joints over a run.

use serde::{Deserialize, Serialize};

use super::sim::{relative, Relative};
use super::{JointSpec, JointType, PhysicsError, SimState};
use crate::ids::JointId;
use crate::scene::IdiScene;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DofKind {
    /// Meters.
    Translation,
    /// Radians.
    Rotation,
}

/// Largest observed excursion of one degree of freedom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofEntry {
    pub name: String,
    pub kind: DofKind,
    /// Locked DOFs should stay near zero; allowed ones may move freely.
    pub locked: bool,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofReport {
    pub joint: JointId,
    #[serde(rename = "type")]
    pub joint_type: JointType,
    pub entries: Vec<DofEntry>,
}

impl DofReport {
    fn max_of(&self, locked: bool, kind: DofKind) -> f64 {
        self.entries.iter().filter(|e| e.locked == locked && e.kind == kind).map(|e| e.max).fold(0.0, f64::max)
    }

    pub fn locked_translation(&self) -> f64 {
        self.max_of(true, DofKind::Translation)
    }

    pub fn locked_rotation(&self) -> f64 {
        self.max_of(true, DofKind::Rotation)
    }

    pub fn allowed_translation(&self) -> f64 {
        self.max_of(false, DofKind::Translation)
    }

    pub fn allowed_rotation(&self) -> f64 {
        self.max_of(false, DofKind::Rotation)
    }
}

/// (name, kind, locked, value getter)
type Measure = (&'static str, DofKind, bool, fn(&Relative) -> f64);

/// Measured DOFs of a joint type.
fn measures(t: JointType) -> Vec<Measure> {
    use DofKind::*;
    let mut out: Vec<Measure> = Vec::new();
    if t == JointType::Plane {
        out.push(("translation-c", Translation, true, |r| r.offset_c));
        out.push(("rotation", Rotation, true, |r| r.rotation.norm()));
        out.push(("translation-a", Translation, false, |r| r.offset_a));
        out.push(("translation-b", Translation, false, |r| r.offset_b));
        return out;
    }
    out.push(("translation", Translation, true, |r| r.offset.norm()));
    match t {
        JointType::Pivot | JointType::Hinge => {
            out.push(("rotation-b", Rotation, true, |r| r.tilt_b));
            out.push(("rotation-c", Rotation, true, |r| r.tilt_c));
            out.push(("rotation-a", Rotation, false, |r| r.turn_a));
        }
        JointType::Condyloid | JointType::Saddle => {
            out.push(("rotation-c", Rotation, true, |r| r.twist));
            out.push(("rotation-a", Rotation, false, |r| r.swing_a));
            out.push(("rotation-b", Rotation, false, |r| r.swing_b));
        }
        JointType::BallAndSocket => {
            out.push(("rotation", Rotation, false, |r| r.rotation.norm()));
        }
        JointType::Plane => unreachable!(),
    }
    out
}

/// Folds states into a [`DofReport`] one at a time, so long runs need not
/// keep their history.
#[derive(Debug, Clone)]
pub struct DofTracker {
    spec: JointSpec,
    ia: usize,
    ib: usize,
    report: DofReport,
}

impl DofTracker {
    pub fn new(scene: &IdiScene, state: &SimState, joint: &JointId) -> Result<Self, PhysicsError> {
        let spec = scene.joint(joint).ok_or_else(|| PhysicsError::UnknownJoint(joint.clone()))?.clone();
        let ia = state.body_index(&spec.base).ok_or_else(|| PhysicsError::UnknownSegment(spec.base.clone()))?;
        let ib = state.body_index(&spec.movable).ok_or_else(|| PhysicsError::UnknownSegment(spec.movable.clone()))?;
        let entries = measures(spec.joint_type)
            .into_iter()
            .map(|(name, kind, locked, _)| DofEntry { name: name.into(), kind, locked, max: 0.0 })
            .collect();
        let report = DofReport { joint: spec.id.clone(), joint_type: spec.joint_type, entries };
        Ok(Self { spec, ia, ib, report })
    }

    pub fn observe(&mut self, state: &SimState) {
        let rel = relative(state, &self.spec, self.ia, self.ib);
        for (entry, (_, _, _, get)) in self.report.entries.iter_mut().zip(measures(self.spec.joint_type)) {
            entry.max = entry.max.max(get(&rel).abs());
        }
    }

    pub fn report(&self) -> &DofReport {
        &self.report
    }

    pub fn into_report(self) -> DofReport {
        self.report
    }
}

/// Maximum excursion of every DOF of `joint` over `history`, relative to
/// the rest pose.
pub fn dof_violation(history: &[SimState], scene: &IdiScene, joint: &JointId) -> Result<DofReport, PhysicsError> {
    let first = history.first().ok_or_else(|| PhysicsError::InvalidJoint("empty state history".into()))?;
    let mut tracker = DofTracker::new(scene, first, joint)?;
    for s in history {
        tracker.observe(s);
    }
    Ok(tracker.into_report())
}
