//! Indexed triangle meshes: import/export, validation and measurement.
//!
//! Units are meters, Y-up, right-handed. Triangles wind counter-clockwise
//! when seen from outside, so outward normals follow the right-hand rule.

mod gltf_io;
mod mass;
mod obj;
pub mod shapes;

use std::path::Path;

use nalgebra::{Isometry3, Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mass::MassProperties;

/// Material id reserved for cap faces generated by plane slicing.
pub const CAP_MATERIAL: u32 = u32::MAX;

/// Triangles with area at or below this are dropped during validation (m²).
pub const DEGENERATE_AREA: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("parse error at {location}: {message}")]
    ParseError { location: String, message: String },
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("triangle {triangle} references vertex {index} but the mesh has {vertex_count} vertices")]
    IndexOutOfBounds { triangle: usize, index: u32, vertex_count: usize },
    #[error("material list has {got} entries for {expected} triangles")]
    MaterialCount { expected: usize, got: usize },
    #[error("unsupported mesh format: {0}")]
    UnsupportedFormat(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Mesh file formats understood by [`import_mesh`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    Obj,
    Gltf,
}

impl MeshFormat {
    /// Guesses the format from a file extension (`obj`, `gltf`, `glb`).
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "obj" => Some(Self::Obj),
            "gltf" | "glb" => Some(Self::Gltf),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn grow(&mut self, p: &Point3<f64>) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn diagonal(&self) -> f64 {
        if self.min.x > self.max.x {
            return 0.0;
        }
        (self.max - self.min).norm()
    }

    pub fn center(&self) -> Point3<f64> {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn contains(&self, p: &Point3<f64>, margin: f64) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] - margin && p[i] <= self.max[i] + margin)
    }
}

/// An indexed triangle mesh with optional per-triangle material ids.
///
/// Every triangle index is checked against the vertex count on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMesh", into = "RawMesh")]
pub struct TriMesh {
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[u32; 3]>,
    materials: Option<Vec<u32>>,
}

#[derive(Serialize, Deserialize)]
struct RawMesh {
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[u32; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    materials: Option<Vec<u32>>,
}

impl TryFrom<RawMesh> for TriMesh {
    type Error = MeshError;

    fn try_from(raw: RawMesh) -> Result<Self, MeshError> {
        let mesh = TriMesh::new(raw.vertices, raw.triangles)?;
        match raw.materials {
            Some(m) => mesh.with_materials(m),
            None => Ok(mesh),
        }
    }
}

impl From<TriMesh> for RawMesh {
    fn from(m: TriMesh) -> Self {
        RawMesh { vertices: m.vertices, triangles: m.triangles, materials: m.materials }
    }
}

/// One use of an undirected edge by a triangle, as produced by [`TriMesh::edge_uses`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct EdgeUse {
    pub lo: u32,
    pub hi: u32,
    pub triangle: u32,
}

impl TriMesh {
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[u32; 3]>) -> Result<Self, MeshError> {
        let n = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&index) = tri.iter().find(|&&i| i as usize >= n) {
                return Err(MeshError::IndexOutOfBounds { triangle: t, index, vertex_count: n });
            }
        }
        Ok(Self { vertices, triangles, materials: None })
    }

    /// Constructor for callers that already guarantee index bounds.
    pub(crate) fn from_parts(
        vertices: Vec<Point3<f64>>,
        triangles: Vec<[u32; 3]>,
        materials: Option<Vec<u32>>,
    ) -> Self {
        debug_assert!(triangles.iter().flatten().all(|&i| (i as usize) < vertices.len()));
        debug_assert!(materials.as_ref().is_none_or(|m| m.len() == triangles.len()));
        Self { vertices, triangles, materials }
    }

    pub fn with_materials(mut self, materials: Vec<u32>) -> Result<Self, MeshError> {
        if materials.len() != self.triangles.len() {
            return Err(MeshError::MaterialCount { expected: self.triangles.len(), got: materials.len() });
        }
        self.materials = Some(materials);
        Ok(self)
    }

    /// Drops degenerate triangles (area ≤ [`DEGENERATE_AREA`]) and returns
    /// how many were removed.
    pub fn validated(self) -> Result<(Self, usize), MeshError> {
        let keep: Vec<bool> = (0..self.triangles.len()).map(|t| self.triangle_area(t) > DEGENERATE_AREA).collect();
        let dropped = keep.iter().filter(|k| !**k).count();
        let triangles: Vec<[u32; 3]> = self.triangles.iter().zip(&keep).filter_map(|(t, k)| k.then_some(*t)).collect();
        if triangles.is_empty() {
            return Err(MeshError::EmptyMesh);
        }
        let materials = self.materials.map(|m| m.into_iter().zip(&keep).filter_map(|(m, k)| k.then_some(m)).collect());
        Ok((Self { vertices: self.vertices, triangles, materials }, dropped))
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn materials(&self) -> Option<&[u32]> {
        self.materials.as_deref()
    }

    pub fn material(&self, t: usize) -> u32 {
        self.materials.as_ref().map_or(0, |m| m[t])
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn corners(&self, t: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    /// Unnormalized normal: twice the area times the unit normal.
    pub fn area_vector(&self, t: usize) -> Vector3<f64> {
        let [a, b, c] = self.corners(t);
        (b - a).cross(&(c - a))
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        0.5 * self.area_vector(t).norm()
    }

    pub fn triangle_normal(&self, t: usize) -> Vector3<f64> {
        let n = self.area_vector(t);
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            Vector3::zeros()
        }
    }

    pub fn centroid(&self, t: usize) -> Point3<f64> {
        let [a, b, c] = self.corners(t);
        Point3::from((a.coords + b.coords + c.coords) / 3.0)
    }

    pub fn bbox(&self) -> Aabb {
        let mut bb = Aabb::empty();
        for t in &self.triangles {
            for &i in t {
                bb.grow(&self.vertices[i as usize]);
            }
        }
        bb
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Every (undirected edge, triangle) incidence, sorted by edge then triangle.
    pub fn edge_uses(&self) -> Vec<EdgeUse> {
        let mut uses = Vec::with_capacity(self.triangles.len() * 3);
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                uses.push(EdgeUse { lo: a.min(b), hi: a.max(b), triangle: t as u32 });
            }
        }
        uses.sort_unstable();
        uses
    }

    /// True iff every edge is shared by exactly two triangles.
    pub fn is_watertight(&self) -> bool {
        if self.triangles.is_empty() {
            return false;
        }
        let uses = self.edge_uses();
        uses.chunk_by(|a, b| (a.lo, a.hi) == (b.lo, b.hi)).all(|g| g.len() == 2)
    }

    /// Triangle pairs sharing an edge used by exactly two triangles.
    pub fn interior_edges(&self) -> Vec<(u32, u32, [u32; 2])> {
        self.edge_uses()
            .chunk_by(|a, b| (a.lo, a.hi) == (b.lo, b.hi))
            .filter(|g| g.len() == 2)
            .map(|g| (g[0].triangle, g[1].triangle, [g[0].lo, g[0].hi]))
            .collect()
    }

    /// Labels each triangle with its edge-connected component, numbered in
    /// order of the lowest triangle index. Returns (labels, component count).
    pub fn triangle_components(&self) -> (Vec<u32>, usize) {
        let mut uf = UnionFind::new(self.triangles.len());
        for g in self.edge_uses().chunk_by(|a, b| (a.lo, a.hi) == (b.lo, b.hi)) {
            for w in g.windows(2) {
                uf.union(w[0].triangle as usize, w[1].triangle as usize);
            }
        }
        uf.labels()
    }

    /// Compacted copy holding only the listed triangles (in the given order).
    pub fn submesh(&self, tris: &[u32]) -> TriMesh {
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let mut triangles = Vec::with_capacity(tris.len());
        for &t in tris {
            let mut out = [0u32; 3];
            for (k, &v) in self.triangles[t as usize].iter().enumerate() {
                if remap[v as usize] == u32::MAX {
                    remap[v as usize] = vertices.len() as u32;
                    vertices.push(self.vertices[v as usize]);
                }
                out[k] = remap[v as usize];
            }
            triangles.push(out);
        }
        let materials = self.materials.as_ref().map(|m| tris.iter().map(|&t| m[t as usize]).collect());
        TriMesh { vertices, triangles, materials }
    }

    /// Concatenates meshes into one (vertex indices shifted, nothing welded).
    pub fn merge(meshes: &[&TriMesh]) -> TriMesh {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        let any_materials = meshes.iter().any(|m| m.materials.is_some());
        let mut materials = Vec::new();
        for m in meshes {
            let base = vertices.len() as u32;
            vertices.extend_from_slice(&m.vertices);
            triangles.extend(m.triangles.iter().map(|t| t.map(|i| i + base)));
            if any_materials {
                materials.extend((0..m.triangle_count()).map(|t| m.material(t)));
            }
        }
        TriMesh { vertices, triangles, materials: any_materials.then_some(materials) }
    }

    pub fn translated(&self, t: Vector3<f64>) -> TriMesh {
        let mut out = self.clone();
        for v in &mut out.vertices {
            *v += t;
        }
        out
    }

    pub fn transformed(&self, iso: &Isometry3<f64>) -> TriMesh {
        let mut out = self.clone();
        for v in &mut out.vertices {
            *v = iso * *v;
        }
        out
    }

    /// Flips every triangle's winding.
    pub fn flipped(&self) -> TriMesh {
        let mut out = self.clone();
        for t in &mut out.triangles {
            t.swap(1, 2);
        }
        out
    }

    /// Closest surface point to `p`: (point, triangle index, squared distance).
    pub fn closest_point(&self, p: &Point3<f64>) -> Option<(Point3<f64>, usize, f64)> {
        let mut best: Option<(Point3<f64>, usize, f64)> = None;
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.corners(t);
            let q = closest_point_on_triangle(p, &a, &b, &c);
            let d2 = (q - p).norm_squared();
            if best.is_none_or(|(_, _, bd)| d2 < bd) {
                best = Some((q, t, d2));
            }
        }
        best
    }

    /// Generalized winding number of `p`: ≈1 inside a closed outward mesh, ≈0 outside.
    pub fn winding_number(&self, p: &Point3<f64>) -> f64 {
        let mut total = 0.0;
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.corners(t);
            let (a, b, c) = (a - p, b - p, c - p);
            let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
            let num = a.dot(&b.cross(&c));
            let den = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
            total += 2.0 * num.atan2(den);
        }
        total / (4.0 * std::f64::consts::PI)
    }

    /// Directed edges used by exactly one triangle, in triangle winding order.
    pub fn boundary_edges(&self) -> Vec<[u32; 2]> {
        let mut out = Vec::new();
        for g in self.edge_uses().chunk_by(|a, b| (a.lo, a.hi) == (b.lo, b.hi)) {
            if g.len() == 1 {
                let tri = self.triangles[g[0].triangle as usize];
                for k in 0..3 {
                    let (a, b) = (tri[k], tri[(k + 1) % 3]);
                    if a.min(b) == g[0].lo && a.max(b) == g[0].hi {
                        out.push([a, b]);
                    }
                }
            }
        }
        out
    }
}

/// Closest point on triangle `abc` to `p` (Ericson, Real-Time Collision Detection 5.1.5).
pub fn closest_point_on_triangle(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> Point3<f64> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Whole-mesh measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshStats {
    /// Enclosed volume (m³). Signed for watertight meshes; absolute best-effort otherwise.
    pub volume: f64,
    pub surface_area: f64,
    pub bbox: Aabb,
    pub component_count: usize,
    pub watertight: bool,
}

/// Volume, area, bounds and edge-connected component count.
///
/// Volume sums signed tetrahedra against the bounding-box center, which is
/// the same closed-surface integral as summing against the origin but does
/// not lose precision when the mesh sits far from it.
pub fn compute_stats(mesh: &TriMesh) -> MeshStats {
    let bbox = mesh.bbox();
    let watertight = mesh.is_watertight();
    let volume = signed_volume_about(mesh, &bbox.center());
    let (_, component_count) = mesh.triangle_components();
    MeshStats {
        volume: if watertight { volume } else { volume.abs() },
        surface_area: mesh.surface_area(),
        bbox,
        component_count,
        watertight,
    }
}

pub(crate) fn signed_volume_about(mesh: &TriMesh, reference: &Point3<f64>) -> f64 {
    let mut six_v = 0.0;
    for t in 0..mesh.triangle_count() {
        let [a, b, c] = mesh.corners(t);
        six_v += (a - reference).dot(&(b - reference).cross(&(c - reference)));
    }
    six_v / 6.0
}

/// Reads a mesh file and validates it (index bounds, degenerate-triangle removal).
pub fn import_mesh(path: &Path, format: Option<MeshFormat>) -> Result<TriMesh, MeshError> {
    Ok(import_mesh_with_report(path, format)?.0)
}

/// Like [`import_mesh`] but also returns how many degenerate triangles were dropped.
pub fn import_mesh_with_report(path: &Path, format: Option<MeshFormat>) -> Result<(TriMesh, usize), MeshError> {
    if !path.exists() {
        return Err(MeshError::FileNotFound(path.display().to_string()));
    }
    let format = match format.or_else(|| MeshFormat::from_path(path)) {
        Some(f) => f,
        None => return Err(MeshError::UnsupportedFormat(path.display().to_string())),
    };
    let raw = match format {
        MeshFormat::Obj => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| MeshError::Io { path: path.display().to_string(), source: e })?;
            obj::parse_obj(&text)?
        }
        MeshFormat::Gltf => gltf_io::read_gltf(path)?,
    };
    if raw.is_empty() {
        return Err(MeshError::EmptyMesh);
    }
    let (mesh, dropped) = raw.validated()?;
    if dropped > 0 {
        log::warn!("{}: dropped {} degenerate triangles", path.display(), dropped);
    }
    Ok((mesh, dropped))
}

/// Writes the mesh as OBJ text with shortest round-trip float formatting.
pub fn export_mesh(mesh: &TriMesh, path: &Path) -> Result<(), MeshError> {
    crate::util::write_atomic(path, obj::to_obj_string(mesh).as_bytes())
        .map_err(|e| MeshError::Io { path: path.display().to_string(), source: e })
}

pub use obj::{parse_obj, to_obj_string};

pub(crate) struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), rank: vec![0; n] }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }

    /// Dense labels numbered by first appearance.
    pub(crate) fn labels(&mut self) -> (Vec<u32>, usize) {
        let n = self.parent.len();
        let mut root_label = vec![u32::MAX; n];
        let mut labels = vec![0u32; n];
        let mut count = 0u32;
        for (i, label) in labels.iter_mut().enumerate() {
            let r = self.find(i);
            if root_label[r] == u32::MAX {
                root_label[r] = count;
                count += 1;
            }
            *label = root_label[r];
        }
        (labels, count as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::shapes;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unit_cube_stats() {
        let s = compute_stats(&shapes::unit_cube());
        assert!((s.volume - 1.0).abs() < 1e-12);
        assert!((s.surface_area - 6.0).abs() < 1e-12);
        assert_eq!(s.component_count, 1);
        assert!(s.watertight);
    }

    #[test]
    fn two_cubes_are_additive() {
        let a = shapes::unit_cube();
        let b = a.translated(Vector3::new(3.0, 0.0, 0.0));
        let s = compute_stats(&TriMesh::merge(&[&a, &b]));
        assert_eq!(s.component_count, 2);
        assert!((s.volume - 2.0).abs() < 1e-12);
    }

    #[test]
    fn icosphere_volume_close_to_analytic() {
        let s = compute_stats(&shapes::icosphere(1.0, 3));
        let exact = 4.0 / 3.0 * std::f64::consts::PI;
        // Subdivision 3 inscribed in the unit sphere loses ~1.2% of the volume.
        let rel = (s.volume - exact).abs() / exact;
        assert!(rel < 0.02, "relative gap {rel}");
        assert!(s.volume < exact);
    }

    #[test]
    fn open_mesh_reports_unsigned_volume() {
        let cube = shapes::unit_cube();
        let open = cube.submesh(&(0..10).collect::<Vec<_>>());
        let s = compute_stats(&open.flipped());
        assert!(!s.watertight);
        assert!(s.volume >= 0.0);
    }

    #[test]
    fn out_of_range_index_rejected() {
        let err = TriMesh::new(vec![Point3::origin(); 3], vec![[0, 1, 3]]).unwrap_err();
        assert!(matches!(err, MeshError::IndexOutOfBounds { index: 3, .. }));
    }

    #[test]
    fn degenerate_triangles_dropped() {
        let cube = shapes::unit_cube();
        let mut verts = cube.vertices().to_vec();
        verts.push(Point3::new(5.0, 5.0, 5.0));
        let mut tris = cube.triangles().to_vec();
        tris.push([8, 8, 0]);
        let (m, dropped) = TriMesh::new(verts, tris).unwrap().validated().unwrap();
        assert_eq!(dropped, 1);
        assert_eq!(m.triangle_count(), 12);
    }

    #[test]
    fn winding_number_inside_outside() {
        let cube = shapes::unit_cube();
        assert!((cube.winding_number(&Point3::new(0.5, 0.5, 0.5)) - 1.0).abs() < 1e-9);
        assert!(cube.winding_number(&Point3::new(2.0, 0.5, 0.5)).abs() < 1e-9);
    }

    #[test]
    fn closest_point_on_face() {
        let cube = shapes::unit_cube();
        let (q, _, d2) = cube.closest_point(&Point3::new(0.5, 0.5, 1.5)).unwrap();
        assert!((q - Point3::new(0.5, 0.5, 1.0)).norm() < 1e-12);
        assert!((d2 - 0.25).abs() < 1e-12);
    }

    /// Brute-force flood fill over triangles sharing an edge.
    fn flood_fill_components(mesh: &TriMesh) -> usize {
        let n = mesh.triangle_count();
        let shares_edge = |a: usize, b: usize| {
            let ta = mesh.triangles()[a];
            let tb = mesh.triangles()[b];
            ta.iter().filter(|v| tb.contains(v)).count() >= 2
        };
        let mut seen = vec![false; n];
        let mut count = 0;
        for s in 0..n {
            if seen[s] {
                continue;
            }
            count += 1;
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(t) = stack.pop() {
                for (u, flag) in seen.iter_mut().enumerate() {
                    if !*flag && shares_edge(t, u) {
                        *flag = true;
                        stack.push(u);
                    }
                }
            }
        }
        count
    }

    fn arb_cube_cloud() -> impl Strategy<Value = TriMesh> {
        prop::collection::vec((-5i32..5, -5i32..5, -5i32..5), 1..6).prop_map(|offsets| {
            let cube = shapes::unit_cube();
            let parts: Vec<TriMesh> = offsets
                .into_iter()
                .map(|(x, y, z)| cube.translated(Vector3::new(x as f64, y as f64, z as f64) * 1.5))
                .collect();
            TriMesh::merge(&parts.iter().collect::<Vec<_>>())
        })
    }

    proptest! {
        #[test]
        fn component_count_matches_flood_fill(mesh in arb_cube_cloud()) {
            prop_assert_eq!(compute_stats(&mesh).component_count, flood_fill_components(&mesh));
        }

        #[test]
        fn volume_is_translation_invariant(
            tx in -1e3f64..1e3, ty in -1e3f64..1e3, tz in -1e3f64..1e3, sub in 0u32..3,
        ) {
            let mesh = shapes::icosphere(0.7, sub);
            let v0 = compute_stats(&mesh).volume;
            let v1 = compute_stats(&mesh.translated(Vector3::new(tx, ty, tz))).volume;
            prop_assert!((v0 - v1).abs() <= 1e-9 * v0.abs());
        }
    }
}
