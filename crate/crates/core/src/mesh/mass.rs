use std::collections::BTreeMap;

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::TriMesh;

/// Rigid-body mass properties of a solid of uniform density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassProperties {
    pub volume: f64,
    pub mass: f64,
    pub center_of_mass: Point3<f64>,
    /// Inertia tensor about the center of mass, world-aligned axes (kg·m²).
    pub inertia: Matrix3<f64>,
}

impl MassProperties {
    /// Volume integrals over the closed surface (Eberly, "Polyhedral Mass
    /// Properties"). Open meshes are closed first by fanning each boundary
    /// loop to its centroid; if that still encloses no volume the bounding
    /// box is used as a solid stand-in.
    pub fn from_mesh(mesh: &TriMesh, density: f64) -> Self {
        let closed;
        let solid = if mesh.is_watertight() {
            mesh
        } else {
            closed = close_boundary_loops(mesh);
            &closed
        };
        let reference = mesh.bbox().center();
        let (volume, com_rel, inertia) = integrate(solid, &reference);
        if volume.is_finite() && volume > 1e-15 {
            return Self {
                volume,
                mass: volume * density,
                center_of_mass: reference + com_rel,
                inertia: inertia * density,
            };
        }
        let bb = mesh.bbox();
        let ext = (bb.max - bb.min).map(|e| e.max(1e-6));
        let volume = ext.x * ext.y * ext.z;
        let mass = volume * density;
        let (x2, y2, z2) = (ext.x * ext.x, ext.y * ext.y, ext.z * ext.z);
        Self {
            volume,
            mass,
            center_of_mass: bb.center(),
            inertia: Matrix3::from_diagonal(&Vector3::new(y2 + z2, x2 + z2, x2 + y2)) * (mass / 12.0),
        }
    }
}

fn subexpressions(w0: f64, w1: f64, w2: f64) -> (f64, f64, f64, f64, f64, f64) {
    let temp0 = w0 + w1;
    let f1 = temp0 + w2;
    let temp1 = w0 * w0;
    let temp2 = temp1 + w1 * temp0;
    let f2 = temp2 + w2 * f1;
    let f3 = w0 * temp1 + w1 * temp2 + w2 * f2;
    let g0 = f2 + w0 * (f1 + w0);
    let g1 = f2 + w1 * (f1 + w1);
    let g2 = f2 + w2 * (f1 + w2);
    (f1, f2, f3, g0, g1, g2)
}

/// Returns (volume, center of mass relative to `reference`, unit-density inertia about the COM).
fn integrate(mesh: &TriMesh, reference: &Point3<f64>) -> (f64, Vector3<f64>, Matrix3<f64>) {
    const MULT: [f64; 10] = [
        1.0 / 6.0,
        1.0 / 24.0,
        1.0 / 24.0,
        1.0 / 24.0,
        1.0 / 60.0,
        1.0 / 60.0,
        1.0 / 60.0,
        1.0 / 120.0,
        1.0 / 120.0,
        1.0 / 120.0,
    ];
    let mut intg = [0.0f64; 10];
    for t in 0..mesh.triangle_count() {
        let [p0, p1, p2] = mesh.corners(t).map(|p| p - reference);
        let d = (p1 - p0).cross(&(p2 - p0));
        let (f1x, f2x, f3x, g0x, g1x, g2x) = subexpressions(p0.x, p1.x, p2.x);
        let (_, f2y, f3y, g0y, g1y, g2y) = subexpressions(p0.y, p1.y, p2.y);
        let (_, f2z, f3z, g0z, g1z, g2z) = subexpressions(p0.z, p1.z, p2.z);
        intg[0] += d.x * f1x;
        intg[1] += d.x * f2x;
        intg[2] += d.y * f2y;
        intg[3] += d.z * f2z;
        intg[4] += d.x * f3x;
        intg[5] += d.y * f3y;
        intg[6] += d.z * f3z;
        intg[7] += d.x * (p0.y * g0x + p1.y * g1x + p2.y * g2x);
        intg[8] += d.y * (p0.z * g0y + p1.z * g1y + p2.z * g2y);
        intg[9] += d.z * (p0.x * g0z + p1.x * g1z + p2.x * g2z);
    }
    for (v, m) in intg.iter_mut().zip(MULT) {
        *v *= m;
    }
    let mass = intg[0];
    let cm = Vector3::new(intg[1], intg[2], intg[3]) / mass;
    let xx = intg[5] + intg[6] - mass * (cm.y * cm.y + cm.z * cm.z);
    let yy = intg[4] + intg[6] - mass * (cm.z * cm.z + cm.x * cm.x);
    let zz = intg[4] + intg[5] - mass * (cm.x * cm.x + cm.y * cm.y);
    let xy = -(intg[7] - mass * cm.x * cm.y);
    let yz = -(intg[8] - mass * cm.y * cm.z);
    let xz = -(intg[9] - mass * cm.z * cm.x);
    let inertia = Matrix3::new(xx, xy, xz, xy, yy, yz, xz, yz, zz);
    (mass, cm, inertia)
}

/// Closes every boundary loop with a fan around the loop centroid.
pub(crate) fn close_boundary_loops(mesh: &TriMesh) -> TriMesh {
    let boundary = mesh.boundary_edges();
    let mut next: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for [a, b] in &boundary {
        next.entry(*a).or_default().push(*b);
    }
    let mut vertices = mesh.vertices().to_vec();
    let mut triangles = mesh.triangles().to_vec();
    let mut used = 0usize;
    while let Some((&start, _)) = next.iter().find(|(_, v)| !v.is_empty()) {
        let mut loop_verts = vec![start];
        let mut cur = start;
        while let Some(n) = next.get_mut(&cur).and_then(|v| v.pop()) {
            used += 1;
            if n == start {
                break;
            }
            loop_verts.push(n);
            cur = n;
            if used > boundary.len() {
                break;
            }
        }
        if loop_verts.len() < 3 {
            continue;
        }
        let c = loop_verts.iter().map(|&i| vertices[i as usize].coords).sum::<Vector3<f64>>() / loop_verts.len() as f64;
        let ci = vertices.len() as u32;
        vertices.push(Point3::from(c));
        for k in 0..loop_verts.len() {
            let a = loop_verts[k];
            let b = loop_verts[(k + 1) % loop_verts.len()];
            triangles.push([b, a, ci]);
        }
    }
    TriMesh::from_parts(vertices, triangles, None)
}
