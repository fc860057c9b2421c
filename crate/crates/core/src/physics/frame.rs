//! Default joint frames from the interface two segments share.

use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector3};

use super::{JointAxes, PhysicsError};
use crate::mesh::{TriMesh, CAP_MATERIAL};

/// Largest gap between two segments that still counts as a shared interface.
pub const INTERFACE_GAP: f64 = 0.01;

/// Weighted surface or curve samples: first and second moments.
#[derive(Default)]
struct Moments {
    weight: f64,
    first: Vector3<f64>,
    second: Matrix3<f64>,
    /// Area-weighted outward normal of the movable side, if built from faces.
    normal: Vector3<f64>,
}

impl Moments {
    fn add_triangle(&mut self, p: [Point3<f64>; 3], area_vector: Vector3<f64>) {
        let area = area_vector.norm();
        if area <= 0.0 {
            return;
        }
        let [a, b, c] = p.map(|q| q.coords);
        let s = a + b + c;
        self.weight += area;
        self.first += s * (area / 3.0);
        self.second += (a * a.transpose() + b * b.transpose() + c * c.transpose() + s * s.transpose()) * (area / 12.0);
        self.normal += area_vector;
    }

    fn add_segment(&mut self, p: Point3<f64>, q: Point3<f64>) {
        let len = (q - p).norm();
        if len <= 0.0 {
            return;
        }
        let (a, b) = (p.coords, q.coords);
        self.weight += len;
        self.first += (a + b) * (len / 2.0);
        self.second +=
            (a * a.transpose() + b * b.transpose() + (a * b.transpose() + b * a.transpose()) * 0.5) * (len / 3.0);
    }

    fn add_point(&mut self, p: Point3<f64>) {
        self.weight += 1.0;
        self.first += p.coords;
        self.second += p.coords * p.coords.transpose();
    }

    fn centroid(&self) -> Point3<f64> {
        Point3::from(self.first / self.weight)
    }

    fn covariance(&self) -> Matrix3<f64> {
        let m = self.first / self.weight;
        self.second / self.weight - m * m.transpose()
    }
}

fn near(base: &TriMesh, p: &Point3<f64>) -> bool {
    base.closest_point(p).is_some_and(|(_, _, d2)| d2 <= INTERFACE_GAP * INTERFACE_GAP)
}

/// Gathers the part of `movable` that touches `base`: cap faces first, then
/// open boundary loops, then any faces lying against the base.
fn interface(base: &TriMesh, movable: &TriMesh) -> Option<Moments> {
    let mut caps = Moments::default();
    if movable.materials().is_some() {
        for t in 0..movable.triangle_count() {
            if movable.material(t) == CAP_MATERIAL && near(base, &movable.centroid(t)) {
                caps.add_triangle(movable.corners(t), movable.area_vector(t));
            }
        }
    }
    if caps.weight > 0.0 {
        return Some(caps);
    }

    let mut ring = Moments::default();
    let v = movable.vertices();
    for [a, b] in movable.boundary_edges() {
        let (p, q) = (v[a as usize], v[b as usize]);
        if near(base, &p) && near(base, &q) {
            ring.add_segment(p, q);
        }
    }
    if ring.weight > 0.0 {
        return Some(ring);
    }

    let close: Vec<bool> = v.iter().map(|p| near(base, p)).collect();
    let mut faces = Moments::default();
    for (t, tri) in movable.triangles().iter().enumerate() {
        if tri.iter().all(|&i| close[i as usize]) {
            faces.add_triangle(movable.corners(t), movable.area_vector(t));
        }
    }
    if faces.weight > 0.0 {
        return Some(faces);
    }

    let mut points = Moments::default();
    for (p, _) in v.iter().zip(&close).filter(|(_, c)| **c) {
        points.add_point(*p);
    }
    (points.weight > 0.0).then_some(points)
}

/// Anchor and frame for a joint between two touching segments.
///
/// The anchor is the centroid of the shared interface, `c` its normal
/// (pointing into the movable segment) and `a` the major principal axis of
/// the interface cross-section. For isotropic sections `a` is the first world
/// axis (x, y, z) with the longest projection onto the interface plane.
pub fn infer_joint_frame(base: &TriMesh, movable: &TriMesh) -> Result<(Point3<f64>, JointAxes), PhysicsError> {
    let m = interface(base, movable).ok_or(PhysicsError::NoSharedInterface)?;
    let anchor = m.centroid();
    let cov = m.covariance();
    let scale = cov.trace().abs().max(1e-30);

    let into_movable = movable.bbox().center() - anchor;
    let c = match m.normal.try_normalize(1e-12) {
        // Faces of the movable face outward, toward the base.
        Some(n) => -n,
        None => {
            let eig = SymmetricEigen::new(cov);
            let i = eig.eigenvalues.imin();
            let n: Vector3<f64> = eig.eigenvectors.column(i).into();
            if eig.eigenvalues[i] > 1e-6 * scale || n.norm() < 0.5 {
                // Too few points to define a plane: point contact.
                into_movable.try_normalize(1e-12).ok_or(PhysicsError::NoSharedInterface)?
            } else {
                n
            }
        }
    };
    let c = if c.dot(&into_movable) < 0.0 && m.normal.norm() < 1e-12 { -c } else { c };

    let proj = Matrix3::identity() - c * c.transpose();
    let planar = proj * cov * proj;
    let eig = SymmetricEigen::new(planar);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let (l1, l2) = (eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]);
    let a = if l1 - l2 > 1e-6 * scale {
        Vector3::from(eig.eigenvectors.column(order[0]))
    } else {
        let mut best = Vector3::zeros();
        for e in [Vector3::x(), Vector3::y(), Vector3::z()] {
            let p = proj * e;
            if p.norm() > best.norm() + 1e-9 {
                best = p;
            }
        }
        best
    };
    let a = canonical_sign(a);
    let axes = JointAxes::from_normal_and_axis(c, a).map_err(|_| PhysicsError::NoSharedInterface)?;
    Ok((anchor, axes))
}

/// Flips `v` so its largest-magnitude component is positive.
fn canonical_sign(v: Vector3<f64>) -> Vector3<f64> {
    let i = v.iamax();
    if v[i] < 0.0 {
        -v
    } else {
        v
    }
}
