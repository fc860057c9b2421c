//! Rigid-body state and the fixed-step integrator.

use nalgebra::{DMatrix, DVector, Matrix3, Point3, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::{JointSpec, JointType, PhysicsError, BAUMGARTE};
use crate::ids::SegmentId;
use crate::mesh::MassProperties;
use crate::scene::IdiScene;
use crate::widgets::MediaState;

/// Uniform density for every segment, kg/m³.
pub const DENSITY: f64 = 500.0;
pub const SOLVER_ITERATIONS: usize = 10;
/// Any body faster than this (m/s or rad/s) aborts the step.
pub const MAX_SPEED: f64 = 1e6;
/// How long a touch sphere keeps moving when the event gives no duration.
pub const DEFAULT_TOUCH_DURATION: f64 = 0.25;
pub const DEFAULT_TOUCH_RADIUS: f64 = 0.01;
/// Bodies slower than this after the solve (m/s and rad/s) are brought to
/// rest. Below it the joint correction only chases rounding error.
pub const REST_SPEED: f64 = 1e-9;
/// Ground contacts handled per body and step.
const MAX_GROUND_CONTACTS: usize = 4;

fn default_radius() -> f64 {
    DEFAULT_TOUCH_RADIUS
}

fn default_duration() -> f64 {
    DEFAULT_TOUCH_DURATION
}

/// A fingertip sphere moving in a straight line from `center` at `time`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TouchEvent {
    pub time: f64,
    pub center: Point3<f64>,
    #[serde(default = "default_radius")]
    pub radius: f64,
    pub velocity: Vector3<f64>,
    /// Seconds the sphere stays active.
    #[serde(default = "default_duration")]
    pub duration: f64,
}

impl TouchEvent {
    pub fn new(time: f64, center: Point3<f64>, velocity: Vector3<f64>) -> Self {
        Self { time, center, radius: DEFAULT_TOUCH_RADIUS, velocity, duration: DEFAULT_TOUCH_DURATION }
    }

    pub fn check(&self) -> Result<(), PhysicsError> {
        let finite = self.time.is_finite()
            && self.center.iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
            && self.duration.is_finite();
        if !finite {
            return Err(PhysicsError::InvalidTouch("non-finite field".into()));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(PhysicsError::InvalidTouch(format!("radius must be positive, got {}", self.radius)));
        }
        if self.duration < 0.0 {
            return Err(PhysicsError::InvalidTouch("duration must be non-negative".into()));
        }
        Ok(())
    }

    /// Sphere center at time `t`.
    pub fn center_at(&self, t: f64) -> Point3<f64> {
        self.center + self.velocity * (t - self.time)
    }

    fn active_at(&self, t: f64) -> bool {
        t >= self.time && t < self.time + self.duration
    }
}

/// A touch that is queued or currently sweeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingTouch {
    /// Caller-assigned sequence number, echoed in [`TouchHit`].
    pub index: usize,
    pub event: TouchEvent,
    /// Per-body contact flag from the previous step.
    in_contact: Vec<bool>,
}

/// An impulse delivered by a touch when it first reached a body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TouchHit {
    pub touch: usize,
    pub step: u64,
    pub segment: SegmentId,
    pub point: Point3<f64>,
    pub impulse: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidBody {
    pub segment: SegmentId,
    pub kinematic: bool,
    pub mass: f64,
    /// Inertia about the center of mass in the rest orientation (kg·m²).
    pub inertia: Matrix3<f64>,
    /// Center of mass in the segment's rest (authored) placement.
    pub rest_com: Point3<f64>,
    /// Current center of mass.
    pub position: Point3<f64>,
    /// Rotation from the rest placement.
    pub orientation: UnitQuaternion<f64>,
    pub linear_velocity: Vector3<f64>,
    pub angular_velocity: Vector3<f64>,
    inv_inertia: Matrix3<f64>,
}

impl RigidBody {
    fn new(segment: SegmentId, props: &MassProperties, kinematic: bool) -> Self {
        let mass = props.mass.max(1e-9);
        let mut inertia = props.inertia;
        if !inertia.iter().all(|v| v.is_finite()) || inertia.trace() <= 0.0 {
            inertia = Matrix3::identity() * 1e-12;
        }
        let inv_inertia = inertia.try_inverse().filter(|m| m.iter().all(|v| v.is_finite())).unwrap_or_else(|| {
            (inertia + Matrix3::identity() * (1e-9 * inertia.trace().max(1e-12))).try_inverse().unwrap()
        });
        Self {
            segment,
            kinematic,
            mass,
            inertia,
            rest_com: props.center_of_mass,
            position: props.center_of_mass,
            orientation: UnitQuaternion::identity(),
            linear_velocity: Vector3::zeros(),
            angular_velocity: Vector3::zeros(),
            inv_inertia,
        }
    }

    pub fn inv_mass(&self) -> f64 {
        if self.kinematic {
            0.0
        } else {
            1.0 / self.mass
        }
    }

    /// World-frame inverse inertia (zero for kinematic bodies).
    pub fn inv_inertia_world(&self) -> Matrix3<f64> {
        if self.kinematic {
            return Matrix3::zeros();
        }
        let r = self.orientation.to_rotation_matrix();
        r.matrix() * self.inv_inertia * r.matrix().transpose()
    }

    pub fn inertia_world(&self) -> Matrix3<f64> {
        let r = self.orientation.to_rotation_matrix();
        r.matrix() * self.inertia * r.matrix().transpose()
    }

    /// Maps a point given in the rest placement to its current world position.
    pub fn to_world(&self, rest: &Point3<f64>) -> Point3<f64> {
        self.position + self.orientation * (rest - self.rest_com)
    }

    /// Maps a world point back into the rest placement.
    pub fn to_rest(&self, world: &Point3<f64>) -> Point3<f64> {
        self.rest_com + self.orientation.inverse() * (world - self.position)
    }

    pub fn point_velocity(&self, world: &Point3<f64>) -> Vector3<f64> {
        self.linear_velocity + self.angular_velocity.cross(&(world - self.position))
    }

    pub fn kinetic_energy(&self) -> f64 {
        if self.kinematic {
            return 0.0;
        }
        0.5 * self.mass * self.linear_velocity.norm_squared()
            + 0.5 * self.angular_velocity.dot(&(self.inertia_world() * self.angular_velocity))
    }

    /// Rotates the body rigidly about a world pivot (sets up initial conditions).
    pub fn rotate_about(&mut self, pivot: &Point3<f64>, rotation: UnitQuaternion<f64>) {
        self.position = pivot + rotation * (self.position - pivot);
        self.orientation = rotation * self.orientation;
    }

    fn apply_impulse(&mut self, at: &Point3<f64>, impulse: &Vector3<f64>) {
        if self.kinematic {
            return;
        }
        self.linear_velocity += impulse / self.mass;
        self.angular_velocity += self.inv_inertia_world() * (at - self.position).cross(impulse);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub time: f64,
    pub step: u64,
    pub gravity: Vector3<f64>,
    pub ground_plane: bool,
    pub bodies: Vec<RigidBody>,
    pub touches: Vec<PendingTouch>,
    /// Impulses delivered by touches so far.
    pub touch_hits: Vec<TouchHit>,
    /// Playback and selection state driven by widgets.
    pub media: MediaState,
}

impl SimState {
    /// Rest state: one body per segment, all at rest.
    pub fn new(scene: &IdiScene) -> Self {
        let dynamic = scene.dynamic_segments();
        let bodies = scene
            .segments
            .iter()
            .map(|s| {
                let props = MassProperties::from_mesh(&s.mesh, DENSITY);
                RigidBody::new(s.id.clone(), &props, !dynamic.contains(&s.id))
            })
            .collect();
        Self {
            time: 0.0,
            step: 0,
            gravity: scene.sim.gravity,
            ground_plane: scene.sim.ground_plane,
            bodies,
            touches: Vec::new(),
            touch_hits: Vec::new(),
            media: MediaState::default(),
        }
    }

    pub fn body(&self, segment: &SegmentId) -> Option<&RigidBody> {
        self.bodies.iter().find(|b| &b.segment == segment)
    }

    pub fn body_mut(&mut self, segment: &SegmentId) -> Option<&mut RigidBody> {
        self.bodies.iter_mut().find(|b| &b.segment == segment)
    }

    pub fn body_index(&self, segment: &SegmentId) -> Option<usize> {
        self.bodies.iter().position(|b| &b.segment == segment)
    }

    pub fn kinetic_energy(&self) -> f64 {
        self.bodies.iter().map(RigidBody::kinetic_energy).sum()
    }

    /// Queues a touch; it takes effect from the first step whose start time
    /// reaches `event.time`.
    pub fn add_touch(&mut self, index: usize, event: TouchEvent) -> Result<(), PhysicsError> {
        event.check()?;
        let n = self.bodies.len();
        self.touches.push(PendingTouch { index, event, in_contact: vec![false; n] });
        Ok(())
    }

    /// Advances one fixed step in place.
    pub fn advance(&mut self, scene: &IdiScene, dt: f64) -> Result<(), PhysicsError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(PhysicsError::InvalidTimestep(dt));
        }
        let joints = resolve_joints(self, scene)?;

        for b in self.bodies.iter_mut().filter(|b| !b.kinematic) {
            b.linear_velocity += self.gravity * dt;
        }
        self.apply_touches(scene);
        for j in &joints {
            damp(&mut self.bodies, j, dt);
        }

        let ground = if self.ground_plane { ground_contacts(self, scene) } else { Vec::new() };
        let mut limit_acc: Vec<Vec<f64>> = vec![Vec::new(); joints.len()];
        let mut ground_acc = vec![0.0; ground.len()];
        for _ in 0..SOLVER_ITERATIONS {
            for (j, acc) in joints.iter().zip(limit_acc.iter_mut()) {
                solve_equalities(&mut self.bodies, j, dt);
                solve_limits(&mut self.bodies, j, dt, acc);
            }
            for (c, acc) in ground.iter().zip(ground_acc.iter_mut()) {
                solve_ground(&mut self.bodies[c.body], c, dt, acc);
            }
        }

        for b in self.bodies.iter_mut().filter(|b| !b.kinematic) {
            if b.linear_velocity.norm() < REST_SPEED && b.angular_velocity.norm() < REST_SPEED {
                b.linear_velocity = Vector3::zeros();
                b.angular_velocity = Vector3::zeros();
            }
            b.position += b.linear_velocity * dt;
            let momentum = b.inertia_world() * b.angular_velocity;
            let w = b.angular_velocity;
            let q = *b.orientation.quaternion();
            let dq = Quaternion::new(0.0, w.x, w.y, w.z) * q * (0.5 * dt);
            b.orientation = UnitQuaternion::new_normalize(q + dq);
            // Torque-free bodies keep their angular momentum as the inertia turns.
            b.angular_velocity = b.inv_inertia_world() * momentum;
        }

        self.step += 1;
        self.time = self.step as f64 * dt;
        self.touches.retain(|t| self.time < t.event.time + t.event.duration);

        for b in &self.bodies {
            let speed = b.linear_velocity.norm().max(b.angular_velocity.norm());
            if speed.is_nan() || speed > MAX_SPEED {
                return Err(PhysicsError::NumericalBlowup { step: self.step, segment: b.segment.clone(), speed });
            }
        }
        Ok(())
    }

    fn apply_touches(&mut self, scene: &IdiScene) {
        let t = self.time;
        for touch in self.touches.iter_mut() {
            if !touch.event.active_at(t) {
                continue;
            }
            let center = touch.event.center_at(t);
            for (i, body) in self.bodies.iter_mut().enumerate() {
                let Some(seg) = scene.segments.get(i) else {
                    continue;
                };
                let contact =
                    if body.kinematic { None } else { touch_contact(body, &seg.mesh, &center, touch.event.radius) };
                let was = std::mem::replace(&mut touch.in_contact[i], contact.is_some());
                let Some((point, n)) = contact else { continue };
                if was {
                    continue;
                }
                let v_rel = (touch.event.velocity - body.point_velocity(&point)).dot(&n);
                if v_rel <= 0.0 {
                    continue;
                }
                let r = point - body.position;
                let rn = r.cross(&n);
                let k = body.inv_mass() + rn.dot(&(body.inv_inertia_world() * rn));
                let impulse = n * (v_rel / k);
                body.apply_impulse(&point, &impulse);
                self.touch_hits.push(TouchHit {
                    touch: touch.index,
                    step: self.step,
                    segment: body.segment.clone(),
                    point,
                    impulse,
                });
            }
        }
    }
}

/// Advances `state` by one step of length `dt`.
pub fn step(state: &SimState, scene: &IdiScene, dt: f64) -> Result<SimState, PhysicsError> {
    let mut next = state.clone();
    next.advance(scene, dt)?;
    Ok(next)
}

/// Deepest contact of a sphere with a body: (world point, push direction).
fn touch_contact(
    body: &RigidBody,
    mesh: &crate::mesh::TriMesh,
    center: &Point3<f64>,
    radius: f64,
) -> Option<(Point3<f64>, Vector3<f64>)> {
    let local = body.to_rest(center);
    let bb = mesh.bbox();
    if !bb.contains(&local, radius) {
        return None;
    }
    let (q, tri, d2) = mesh.closest_point(&local)?;
    let d = d2.sqrt();
    let inside = mesh.is_watertight() && mesh.winding_number(&local) > 0.5;
    if !inside && d >= radius {
        return None;
    }
    let n_rest = if inside || d < 1e-12 { -mesh.triangle_normal(tri) } else { (q - local) / d };
    let n = (body.orientation * n_rest).try_normalize(1e-12)?;
    Some((body.to_world(&q), n))
}

/// Joint data in world coordinates for the current poses.
struct JointFrame<'a> {
    spec: &'a JointSpec,
    ia: usize,
    ib: usize,
    pa: Point3<f64>,
    pb: Point3<f64>,
    /// Frame axes carried by the base body.
    a: [Vector3<f64>; 3],
    /// Frame axes carried by the movable body.
    b: [Vector3<f64>; 3],
}

/// Base and movable body indices of a joint.
struct JointRef<'a> {
    spec: &'a JointSpec,
    ia: usize,
    ib: usize,
}

fn resolve_joints<'a>(state: &SimState, scene: &'a IdiScene) -> Result<Vec<JointRef<'a>>, PhysicsError> {
    scene
        .joints
        .iter()
        .map(|spec| {
            let ia = state.body_index(&spec.base).ok_or_else(|| PhysicsError::UnknownSegment(spec.base.clone()))?;
            let ib =
                state.body_index(&spec.movable).ok_or_else(|| PhysicsError::UnknownSegment(spec.movable.clone()))?;
            Ok(JointRef { spec, ia, ib })
        })
        .collect()
}

fn frame<'a>(bodies: &[RigidBody], j: &JointRef<'a>) -> JointFrame<'a> {
    let (ba, bb) = (&bodies[j.ia], &bodies[j.ib]);
    let axes = [j.spec.axes.a, j.spec.axes.b, j.spec.axes.c];
    JointFrame {
        spec: j.spec,
        ia: j.ia,
        ib: j.ib,
        pa: ba.to_world(&j.spec.anchor),
        pb: bb.to_world(&j.spec.anchor),
        a: axes.map(|v| ba.orientation * v),
        b: axes.map(|v| bb.orientation * v),
    }
}

/// Relative pose measurements shared by the solver and the DOF tracker.
pub(crate) struct Relative {
    /// Movable anchor minus base anchor, world frame.
    pub offset: Vector3<f64>,
    /// `offset` along the base-carried frame axes.
    pub offset_a: f64,
    pub offset_b: f64,
    pub offset_c: f64,
    /// Rotation of the movable relative to the base, as a rotation vector in
    /// world coordinates.
    pub rotation: Vector3<f64>,
    /// Swing of `c` about `a` and `b`, and twist about `c`.
    pub swing_a: f64,
    pub swing_b: f64,
    pub twist: f64,
    /// Turn about `a` (revolute angle).
    pub turn_a: f64,
    /// Misalignment of the revolute axis about `b` and `c`.
    pub tilt_b: f64,
    pub tilt_c: f64,
}

pub(crate) fn relative(state: &SimState, spec: &JointSpec, ia: usize, ib: usize) -> Relative {
    let f = frame(&state.bodies, &JointRef { spec, ia, ib });
    let (qa, qb) = (state.bodies[ia].orientation, state.bodies[ib].orientation);
    let [aa, ab, ac] = f.a;
    let [ba, bb, bc] = f.b;
    let q_rel = qa.inverse() * qb;
    let v = q_rel.quaternion().imag();
    let twist = wrap(2.0 * v.dot(&spec.axes.c).atan2(q_rel.quaternion().w));
    let offset = f.pb - f.pa;
    let swing = swing_vector(&ac, &bc);
    Relative {
        offset,
        offset_a: aa.dot(&offset),
        offset_b: ab.dot(&offset),
        offset_c: ac.dot(&offset),
        rotation: (qb * qa.inverse()).scaled_axis(),
        swing_a: swing.dot(&aa),
        swing_b: swing.dot(&ab),
        twist,
        turn_a: ab.cross(&bb).dot(&aa).atan2(ab.dot(&bb)),
        tilt_b: (-ba.dot(&ac)).atan2(ba.dot(&aa)),
        tilt_c: ba.dot(&ab).atan2(ba.dot(&aa)),
    }
}

/// Rotation vector of the shortest rotation taking `from` onto `to`.
fn swing_vector(from: &Vector3<f64>, to: &Vector3<f64>) -> Vector3<f64> {
    let n = from.cross(to);
    let s = n.norm();
    if s < 1e-12 {
        return Vector3::zeros();
    }
    n * (s.atan2(from.dot(to)) / s)
}

fn wrap(x: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let y = (x + pi).rem_euclid(2.0 * pi) - pi;
    if y == -pi {
        pi
    } else {
        y
    }
}

/// One Jacobian row: linear and angular parts for base (`*_a`) and movable (`*_b`).
#[derive(Clone, Copy)]
struct Row {
    la: Vector3<f64>,
    aa: Vector3<f64>,
    lb: Vector3<f64>,
    ab: Vector3<f64>,
    /// Position error the row drives to zero (or above zero for limits).
    error: f64,
}

impl Row {
    fn linear(dir: Vector3<f64>, ra: Vector3<f64>, rb: Vector3<f64>, error: f64) -> Self {
        Row { la: -dir, aa: -ra.cross(&dir), lb: dir, ab: rb.cross(&dir), error }
    }

    fn angular(dir: Vector3<f64>, error: f64) -> Self {
        Row { la: Vector3::zeros(), aa: -dir, lb: Vector3::zeros(), ab: dir, error }
    }

    fn negated(self) -> Self {
        Row { la: -self.la, aa: -self.aa, lb: -self.lb, ab: -self.ab, error: self.error }
    }

    fn velocity(&self, a: &RigidBody, b: &RigidBody) -> f64 {
        self.la.dot(&a.linear_velocity)
            + self.aa.dot(&a.angular_velocity)
            + self.lb.dot(&b.linear_velocity)
            + self.ab.dot(&b.angular_velocity)
    }

    /// Velocity response of this row to a unit impulse along `other`.
    fn coupling(&self, other: &Row, ima: f64, ia: &Matrix3<f64>, imb: f64, ib: &Matrix3<f64>) -> f64 {
        self.la.dot(&other.la) * ima
            + self.aa.dot(&(ia * other.aa))
            + self.lb.dot(&other.lb) * imb
            + self.ab.dot(&(ib * other.ab))
    }

    fn apply(&self, lambda: f64, a: &mut RigidBody, ia: &Matrix3<f64>, b: &mut RigidBody, ib: &Matrix3<f64>) {
        if !a.kinematic {
            a.linear_velocity += self.la * (lambda / a.mass);
            a.angular_velocity += ia * self.aa * lambda;
        }
        if !b.kinematic {
            b.linear_velocity += self.lb * (lambda / b.mass);
            b.angular_velocity += ib * self.ab * lambda;
        }
    }
}

fn pair(bodies: &mut [RigidBody], ia: usize, ib: usize) -> Option<(&mut RigidBody, &mut RigidBody)> {
    use std::cmp::Ordering::*;
    match ia.cmp(&ib) {
        Less => {
            let (l, r) = bodies.split_at_mut(ib);
            Some((&mut l[ia], &mut r[0]))
        }
        Greater => {
            let (l, r) = bodies.split_at_mut(ia);
            Some((&mut r[0], &mut l[ib]))
        }
        Equal => None,
    }
}

fn equality_rows(f: &JointFrame, bodies: &[RigidBody]) -> Vec<Row> {
    let (xa, xb) = (bodies[f.ia].position, bodies[f.ib].position);
    let rb = f.pb - xb;
    let [aa, ab, ac] = f.a;
    let mut rows = Vec::with_capacity(6);
    match f.spec.joint_type {
        JointType::Plane => {
            let ra = f.pb - xa;
            rows.push(Row::linear(ac, ra, rb, ac.dot(&(f.pb - f.pa))));
            let rot = (bodies[f.ib].orientation * bodies[f.ia].orientation.inverse()).scaled_axis();
            for e in [Vector3::x(), Vector3::y(), Vector3::z()] {
                rows.push(Row::angular(e, rot.dot(&e)));
            }
        }
        t => {
            let ra = f.pa - xa;
            let d = f.pb - f.pa;
            for e in [Vector3::x(), Vector3::y(), Vector3::z()] {
                rows.push(Row::linear(e, ra, rb, d.dot(&e)));
            }
            match t {
                JointType::Pivot | JointType::Hinge => {
                    let err = aa.cross(&f.b[0]);
                    rows.push(Row::angular(ab, err.dot(&ab)));
                    rows.push(Row::angular(ac, err.dot(&ac)));
                }
                JointType::Condyloid | JointType::Saddle => {
                    let qa = bodies[f.ia].orientation;
                    let q_rel = qa.inverse() * bodies[f.ib].orientation;
                    let v = q_rel.quaternion().imag();
                    let twist = wrap(2.0 * v.dot(&f.spec.axes.c).atan2(q_rel.quaternion().w));
                    let dir = (ac + f.b[2]).try_normalize(1e-9).unwrap_or(ac);
                    rows.push(Row::angular(dir, twist));
                }
                _ => {}
            }
        }
    }
    rows
}

/// Solves all equality rows of one joint together (block Gauss–Seidel).
fn solve_equalities(bodies: &mut [RigidBody], j: &JointRef, dt: f64) {
    let f = &frame(bodies, j);
    let rows = equality_rows(f, bodies);
    let Some((a, b)) = pair(bodies, f.ia, f.ib) else {
        return;
    };
    if a.kinematic && b.kinematic {
        return;
    }
    let (ima, imb) = (a.inv_mass(), b.inv_mass());
    let (ia, ib) = (a.inv_inertia_world(), b.inv_inertia_world());
    let n = rows.len();
    let k = DMatrix::from_fn(n, n, |i, j| rows[i].coupling(&rows[j], ima, &ia, imb, &ib));
    let rhs = DVector::from_fn(n, |i, _| -(rows[i].velocity(a, b) + BAUMGARTE / dt * rows[i].error));
    let Some(lambda) = k.lu().solve(&rhs) else {
        return;
    };
    if !lambda.iter().all(|l| l.is_finite()) {
        return;
    }
    for (row, l) in rows.iter().zip(lambda.iter()) {
        row.apply(*l, a, &ia, b, &ib);
    }
}

/// Active limit rows: each must end with non-negative error velocity.
fn limit_rows(f: &JointFrame, bodies: &[RigidBody]) -> Vec<(usize, Row)> {
    let Some(limits) = f.spec.effective_limits() else {
        return Vec::new();
    };
    let [aa, ab, ac] = f.a;
    let [_, bb, bc] = f.b;
    let mut rows = Vec::new();
    let mut push = |slot: usize, value: f64, range: Option<[f64; 2]>, row: Row| {
        if let Some([lo, hi]) = range {
            if value < lo {
                rows.push((slot, Row { error: value - lo, ..row }));
            } else if value > hi {
                rows.push((slot + 1, Row { error: hi - value, ..row.negated() }));
            }
        }
    };
    match f.spec.joint_type {
        JointType::Pivot | JointType::Hinge => {
            let turn = ab.cross(&bb).dot(&aa).atan2(ab.dot(&bb));
            push(0, turn, limits.a, Row::angular(aa, 0.0));
        }
        JointType::Condyloid | JointType::Saddle | JointType::BallAndSocket => {
            let swing = swing_vector(&ac, &bc);
            push(0, swing.dot(&aa), limits.a, Row::angular(aa, 0.0));
            push(2, swing.dot(&ab), limits.b, Row::angular(ab, 0.0));
            if f.spec.joint_type == JointType::BallAndSocket {
                let q_rel = bodies[f.ia].orientation.inverse() * bodies[f.ib].orientation;
                let v = q_rel.quaternion().imag();
                let twist = wrap(2.0 * v.dot(&f.spec.axes.c).atan2(q_rel.quaternion().w));
                push(4, twist, limits.c, Row::angular((ac + bc).try_normalize(1e-9).unwrap_or(ac), 0.0));
            }
        }
        JointType::Plane => {
            let (xa, xb) = (bodies[f.ia].position, bodies[f.ib].position);
            let (ra, rb) = (f.pb - xa, f.pb - xb);
            let d = f.pb - f.pa;
            push(0, aa.dot(&d), limits.a, Row::linear(aa, ra, rb, 0.0));
            push(2, ab.dot(&d), limits.b, Row::linear(ab, ra, rb, 0.0));
        }
    }
    rows
}

fn solve_limits(bodies: &mut [RigidBody], j: &JointRef, dt: f64, acc: &mut Vec<f64>) {
    let f = &frame(bodies, j);
    let rows = limit_rows(f, bodies);
    if rows.is_empty() {
        return;
    }
    if acc.len() < 6 {
        acc.resize(6, 0.0);
    }
    let Some((a, b)) = pair(bodies, f.ia, f.ib) else {
        return;
    };
    let (ima, imb) = (a.inv_mass(), b.inv_mass());
    let (ia, ib) = (a.inv_inertia_world(), b.inv_inertia_world());
    for (slot, row) in rows {
        let k = row.coupling(&row, ima, &ia, imb, &ib);
        if k <= 0.0 {
            continue;
        }
        let lambda = -(row.velocity(a, b) + BAUMGARTE / dt * row.error) / k;
        let total = (acc[slot] + lambda).max(0.0);
        let applied = total - acc[slot];
        acc[slot] = total;
        row.apply(applied, a, &ia, b, &ib);
    }
}

/// Exact exponential decay of relative velocity along every free axis.
fn damp(bodies: &mut [RigidBody], j: &JointRef, dt: f64) {
    let f = &frame(bodies, j);
    let c = f.spec.resistance.damping();
    let jt = f.spec.joint_type;
    let (xa, xb) = (bodies[f.ia].position, bodies[f.ib].position);
    let mut rows = Vec::new();
    for axis in jt.free_rotations() {
        rows.push(Row::angular(f.a[axis_index(*axis)], 0.0));
    }
    for axis in jt.free_translations() {
        rows.push(Row::linear(f.a[axis_index(*axis)], f.pb - xa, f.pb - xb, 0.0));
    }
    let Some((a, b)) = pair(bodies, f.ia, f.ib) else {
        return;
    };
    let (ima, imb) = (a.inv_mass(), b.inv_mass());
    let (ia, ib) = (a.inv_inertia_world(), b.inv_inertia_world());
    for row in rows {
        let k = row.coupling(&row, ima, &ia, imb, &ib);
        if k <= 0.0 {
            continue;
        }
        let v = row.velocity(a, b);
        let lambda = -v * (1.0 - (-c * k * dt).exp()) / k;
        row.apply(lambda, a, &ia, b, &ib);
    }
}

fn axis_index(axis: char) -> usize {
    match axis {
        'a' => 0,
        'b' => 1,
        _ => 2,
    }
}

struct GroundContact {
    body: usize,
    point: Point3<f64>,
    depth: f64,
}

fn ground_contacts(state: &SimState, scene: &IdiScene) -> Vec<GroundContact> {
    let mut out = Vec::new();
    for (i, (body, seg)) in state.bodies.iter().zip(&scene.segments).enumerate() {
        if body.kinematic {
            continue;
        }
        let mut below: Vec<(f64, Point3<f64>)> =
            seg.mesh.vertices().iter().map(|v| body.to_world(v)).filter(|p| p.y < 0.0).map(|p| (p.y, p)).collect();
        below.sort_by(|x, y| x.0.total_cmp(&y.0));
        for (depth, point) in below.into_iter().take(MAX_GROUND_CONTACTS) {
            out.push(GroundContact { body: i, point, depth });
        }
    }
    out
}

fn solve_ground(body: &mut RigidBody, c: &GroundContact, dt: f64, acc: &mut f64) {
    let n = Vector3::y();
    let r = c.point - body.position;
    let rn = r.cross(&n);
    let iw = body.inv_inertia_world();
    let k = body.inv_mass() + rn.dot(&(iw * rn));
    if k <= 0.0 {
        return;
    }
    let v = body.point_velocity(&c.point).dot(&n);
    let lambda = -(v + BAUMGARTE / dt * c.depth) / k;
    let total = (*acc + lambda).max(0.0);
    let applied = total - *acc;
    *acc = total;
    body.apply_impulse(&c.point, &(n * applied));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_keeps_half_open_range() {
        let pi = std::f64::consts::PI;
        assert_eq!(wrap(0.0), 0.0);
        assert!((wrap(3.0 * pi) - pi).abs() < 1e-12);
        assert!((wrap(-0.5) + 0.5).abs() < 1e-15);
    }
}
