//! Joint taxonomy and rigid-body simulation.
//!
//! Every segment becomes a rigid body. Movables of a joint are dynamic, all
//! other segments are kinematic and never move. [`step`] advances the world
//! with semi-implicit Euler and a sequential-impulse joint solver.

mod dof;
mod frame;
mod sim;

use std::fmt;
use std::str::FromStr;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{JointId, SegmentId};
use crate::scene::{self, IdiScene, ANCHOR_TOLERANCE};

pub use dof::{dof_violation, DofEntry, DofKind, DofReport, DofTracker};
pub use frame::{infer_joint_frame, INTERFACE_GAP};
pub use sim::{
    step, RigidBody, SimState, TouchEvent, TouchHit, DEFAULT_TOUCH_DURATION, DEFAULT_TOUCH_RADIUS, DENSITY, MAX_SPEED,
    REST_SPEED, SOLVER_ITERATIONS,
};

/// Baumgarte positional correction factor.
pub const BAUMGARTE: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicsError {
    #[error("unknown segment {0}")]
    UnknownSegment(SegmentId),
    #[error("unknown joint {0}")]
    UnknownJoint(JointId),
    #[error("base and movable are both {0}")]
    SameSegment(SegmentId),
    #[error("joint {0} duplicates an existing joint")]
    DuplicateJoint(JointId),
    #[error("joint base chain forms a cycle through {0}")]
    CyclicBaseChain(SegmentId),
    #[error("invalid joint: {0}")]
    InvalidJoint(String),
    #[error("segments share no interface within {INTERFACE_GAP} m")]
    NoSharedInterface,
    #[error("numerical blowup at step {step}: segment {segment} speed {speed:e}")]
    NumericalBlowup { step: u64, segment: SegmentId, speed: f64 },
    #[error("time step must be positive and finite, got {0}")]
    InvalidTimestep(f64),
    #[error("invalid touch: {0}")]
    InvalidTouch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JointType {
    Pivot,
    BallAndSocket,
    Hinge,
    Condyloid,
    Plane,
    Saddle,
}

impl JointType {
    pub const ALL: [JointType; 6] = [
        JointType::Pivot,
        JointType::BallAndSocket,
        JointType::Hinge,
        JointType::Condyloid,
        JointType::Plane,
        JointType::Saddle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            JointType::Pivot => "pivot",
            JointType::BallAndSocket => "ball-and-socket",
            JointType::Hinge => "hinge",
            JointType::Condyloid => "condyloid",
            JointType::Plane => "plane",
            JointType::Saddle => "saddle",
        }
    }

    /// Free rotational axes (`'a'`, `'b'`, `'c'`) of the joint frame.
    pub fn free_rotations(self) -> &'static [char] {
        match self {
            JointType::Pivot | JointType::Hinge => &['a'],
            JointType::BallAndSocket => &['a', 'b', 'c'],
            JointType::Condyloid | JointType::Saddle => &['a', 'b'],
            JointType::Plane => &[],
        }
    }

    /// Free translational axes of the joint frame.
    pub fn free_translations(self) -> &'static [char] {
        match self {
            JointType::Plane => &['a', 'b'],
            _ => &[],
        }
    }

    pub fn default_limits(self) -> Option<JointLimits> {
        let swing = match self {
            JointType::Condyloid => std::f64::consts::FRAC_PI_2,
            JointType::Saddle => 2.0 * std::f64::consts::FRAC_PI_3,
            _ => return None,
        };
        Some(JointLimits { a: Some([-swing, swing]), b: Some([-swing, swing]), c: None })
    }
}

impl fmt::Display for JointType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for JointType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let norm: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_lowercase();
        Ok(match norm.as_str() {
            "pivot" => JointType::Pivot,
            "ballandsocket" | "ball" | "balljoint" => JointType::BallAndSocket,
            "hinge" => JointType::Hinge,
            "condyloid" => JointType::Condyloid,
            "plane" | "gliding" => JointType::Plane,
            "saddle" => JointType::Saddle,
            _ => return Err(format!("unknown joint type '{s}'")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resistance {
    #[default]
    Low,
    Medium,
    High,
}

impl Resistance {
    /// Damping coefficient: N·m·s/rad on free rotations, N·s/m on free translations.
    pub fn damping(self) -> f64 {
        match self {
            Resistance::Low => 0.02,
            Resistance::Medium => 0.2,
            Resistance::High => 2.0,
        }
    }
}

impl FromStr for Resistance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(Resistance::Low),
            "medium" => Ok(Resistance::Medium),
            "high" => Ok(Resistance::High),
            _ => Err(format!("unknown resistance '{s}' (expected low, medium or high)")),
        }
    }
}

impl fmt::Display for Resistance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Resistance::Low => "low",
            Resistance::Medium => "medium",
            Resistance::High => "high",
        })
    }
}

/// Right-handed orthonormal joint frame with `b = c × a`.
///
/// Revolute joints turn about `a`; `c` is the interface normal, pointing
/// from the base into the movable segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointAxes {
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
    pub c: Vector3<f64>,
}

impl JointAxes {
    pub fn canonical() -> Self {
        Self { a: Vector3::x(), b: Vector3::y(), c: Vector3::z() }
    }

    /// Frame from a normal `c` and an in-plane direction `a`; `a` is
    /// re-orthogonalized against `c`.
    pub fn from_normal_and_axis(c: Vector3<f64>, a: Vector3<f64>) -> Result<Self, String> {
        let c = c.try_normalize(1e-12).ok_or("normal has zero length")?;
        let a = (a - c * a.dot(&c)).try_normalize(1e-12).ok_or("axis is parallel to the normal")?;
        Ok(Self { a, b: c.cross(&a), c })
    }

    /// Relabels the frame so the interface normal becomes the turning axis `a`.
    pub fn normal_as_axis(self) -> Self {
        Self { a: self.c, b: self.a, c: self.b }
    }

    pub fn check_orthonormal(&self) -> Result<(), String> {
        let tol = 1e-9;
        for (name, v) in [("a", self.a), ("b", self.b), ("c", self.c)] {
            if !v.iter().all(|x| x.is_finite()) || (v.norm() - 1.0).abs() > tol {
                return Err(format!("axis {name} is not unit length"));
            }
        }
        if self.a.dot(&self.b).abs() > tol || self.b.dot(&self.c).abs() > tol || self.a.dot(&self.c).abs() > tol {
            return Err("axes are not mutually orthogonal".into());
        }
        if (self.c.cross(&self.a) - self.b).norm() > tol {
            return Err("axes are not right-handed (b must equal c × a)".into());
        }
        Ok(())
    }
}

/// Optional ranges per frame axis: radians for free rotations, meters for
/// the free translations of a plane joint.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointLimits {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<[f64; 2]>,
}

impl JointLimits {
    pub fn check(&self) -> Result<(), String> {
        for (name, r) in [("a", self.a), ("b", self.b), ("c", self.c)] {
            if let Some([lo, hi]) = r {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(format!("limit on {name} must be a finite [lower, upper] range"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub id: JointId,
    #[serde(rename = "type")]
    pub joint_type: JointType,
    pub base: SegmentId,
    pub movable: SegmentId,
    pub anchor: Point3<f64>,
    pub axes: JointAxes,
    #[serde(default)]
    pub resistance: Resistance,
    /// Overrides the type's default limits when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limits: Option<JointLimits>,
}

impl JointSpec {
    /// Limits in force during simulation: explicit ones, else the type defaults.
    pub fn effective_limits(&self) -> Option<JointLimits> {
        self.limits.or_else(|| self.joint_type.default_limits())
    }
}

impl IdiScene {
    /// Adds a joint. An empty `spec.id` gets a fresh id. Returns the joint id.
    pub fn attach_joint(&mut self, mut spec: JointSpec) -> Result<JointId, PhysicsError> {
        if spec.id.as_str().is_empty() {
            spec.id = JointId::next(self.joints.iter().map(|j| &j.id));
        } else if self.joint(&spec.id).is_some() {
            return Err(PhysicsError::DuplicateJoint(spec.id));
        }
        let base = self.segment(&spec.base).ok_or_else(|| PhysicsError::UnknownSegment(spec.base.clone()))?;
        let movable = self.segment(&spec.movable).ok_or_else(|| PhysicsError::UnknownSegment(spec.movable.clone()))?;
        if spec.base == spec.movable {
            return Err(PhysicsError::SameSegment(spec.base));
        }
        spec.axes.check_orthonormal().map_err(PhysicsError::InvalidJoint)?;
        if let Some(l) = &spec.limits {
            l.check().map_err(PhysicsError::InvalidJoint)?;
        }
        for seg in [base, movable] {
            let d = seg.mesh.closest_point(&spec.anchor).map_or(f64::INFINITY, |(_, _, d2)| d2.sqrt());
            if d.is_nan() || d > ANCHOR_TOLERANCE {
                return Err(PhysicsError::InvalidJoint(format!(
                    "anchor is {d:.4} m from segment {}, more than {ANCHOR_TOLERANCE} m",
                    seg.id
                )));
            }
        }
        let key = scene::anchor_key(&spec);
        if self.joints.iter().any(|j| j.base == spec.base && j.movable == spec.movable && scene::anchor_key(j) == key) {
            return Err(PhysicsError::DuplicateJoint(spec.id));
        }
        let mut trial = self.joints.clone();
        trial.push(spec.clone());
        if let Some(seg) = scene::base_chain_cycle(&trial) {
            return Err(PhysicsError::CyclicBaseChain(seg));
        }
        let id = spec.id.clone();
        self.joints.push(spec);
        Ok(id)
    }

    /// Builds a joint spec whose frame is inferred from the segments' shared
    /// interface. Pivots turn about the interface normal, every other type
    /// keeps the inferred frame.
    pub fn joint_from_interface(
        &self,
        joint_type: JointType,
        base: &SegmentId,
        movable: &SegmentId,
        resistance: Resistance,
    ) -> Result<JointSpec, PhysicsError> {
        let b = self.segment(base).ok_or_else(|| PhysicsError::UnknownSegment(base.clone()))?;
        let m = self.segment(movable).ok_or_else(|| PhysicsError::UnknownSegment(movable.clone()))?;
        if base == movable {
            return Err(PhysicsError::SameSegment(base.clone()));
        }
        let (anchor, axes) = infer_joint_frame(&b.mesh, &m.mesh)?;
        let axes = if joint_type == JointType::Pivot { axes.normal_as_axis() } else { axes };
        Ok(JointSpec {
            id: JointId::new(""),
            joint_type,
            base: base.clone(),
            movable: movable.clone(),
            anchor,
            axes,
            resistance,
            limits: None,
        })
    }

    pub fn remove_joint(&mut self, id: &JointId) -> Result<JointSpec, PhysicsError> {
        let pos = self.joints.iter().position(|j| &j.id == id).ok_or_else(|| PhysicsError::UnknownJoint(id.clone()))?;
        Ok(self.joints.remove(pos))
    }
}
