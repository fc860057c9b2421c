//! Wavefront OBJ reading and writing (geometry and material groups only).

use std::collections::HashMap;
use std::fmt::Write;

use nalgebra::Point3;

use super::{MeshError, TriMesh, CAP_MATERIAL};

const CAP_NAME: &str = "cap";

fn material_name(id: u32) -> String {
    if id == CAP_MATERIAL {
        CAP_NAME.to_owned()
    } else {
        format!("m{id}")
    }
}

/// Parses OBJ text. Polygons are fan-triangulated; texture/normal indices
/// are ignored; negative (relative) indices are supported.
///
/// `usemtl cap` maps to [`CAP_MATERIAL`], `usemtl m<N>` to N, and any other
/// name to a fresh id in order of first appearance.
pub fn parse_obj(text: &str) -> Result<TriMesh, MeshError> {
    let mut vertices: Vec<Point3<f64>> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();
    let mut materials: Vec<u32> = Vec::new();
    let mut saw_material = false;
    let mut current = 0u32;
    let mut named: HashMap<String, u32> = HashMap::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let err = |message: String| MeshError::ParseError { location: format!("line {}", lineno + 1), message };
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let mut xyz = [0.0f64; 3];
                for c in &mut xyz {
                    let tok = parts.next().ok_or_else(|| err("vertex needs 3 coordinates".into()))?;
                    *c = tok.parse().map_err(|_| err(format!("bad coordinate {tok:?}")))?;
                    if !c.is_finite() {
                        return Err(err(format!("non-finite coordinate {tok:?}")));
                    }
                }
                vertices.push(Point3::from(xyz));
            }
            Some("f") => {
                let mut poly = Vec::new();
                for tok in parts {
                    let idx_str = tok.split('/').next().unwrap_or("");
                    let idx: i64 = idx_str.parse().map_err(|_| err(format!("bad face index {tok:?}")))?;
                    let n = vertices.len() as i64;
                    let resolved = if idx > 0 { idx - 1 } else { n + idx };
                    if idx == 0 || resolved < 0 || resolved >= n {
                        return Err(err(format!("face index {idx} out of range ({n} vertices defined)")));
                    }
                    poly.push(resolved as u32);
                }
                if poly.len() < 3 {
                    return Err(err("face needs at least 3 vertices".into()));
                }
                for k in 1..poly.len() - 1 {
                    triangles.push([poly[0], poly[k], poly[k + 1]]);
                    materials.push(current);
                }
            }
            Some("usemtl") => {
                let name = parts.next().unwrap_or("").to_owned();
                saw_material = true;
                current = if name == CAP_NAME {
                    CAP_MATERIAL
                } else if let Some(n) = name.strip_prefix('m').and_then(|s| s.parse::<u32>().ok()) {
                    n
                } else {
                    let next = named.len() as u32;
                    *named.entry(name).or_insert(next)
                };
            }
            _ => {}
        }
    }
    let mesh = TriMesh::new(vertices, triangles)?;
    if saw_material {
        mesh.with_materials(materials)
    } else {
        Ok(mesh)
    }
}

/// Serializes to OBJ with 1-based indices. Floats use Rust's shortest
/// round-trip formatting so re-parsing reproduces every coordinate exactly.
pub fn to_obj_string(mesh: &TriMesh) -> String {
    let mut out = String::with_capacity(mesh.vertex_count() * 40 + mesh.triangle_count() * 24);
    for v in mesh.vertices() {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    let mut current: Option<u32> = None;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        if let Some(m) = mesh.materials() {
            if current != Some(m[t]) {
                let _ = writeln!(out, "usemtl {}", material_name(m[t]));
                current = Some(m[t]);
            }
        }
        let _ = writeln!(out, "f {} {} {}", tri[0] + 1, tri[1] + 1, tri[2] + 1);
    }
    out
}
