//! glTF 2.0 geometry import: positions and indices of triangle primitives,
//! with node transforms applied. Materials, textures and animation are ignored.

use std::path::Path;

use gltf::mesh::Mode;
use nalgebra::{Matrix4, Point3};

use super::{MeshError, TriMesh};

pub(super) fn read_gltf(path: &Path) -> Result<TriMesh, MeshError> {
    let perr = |message: String| MeshError::ParseError { location: path.display().to_string(), message };
    let gltf = gltf::Gltf::open(path).map_err(|e| perr(e.to_string()))?;
    let buffers =
        gltf::import_buffers(&gltf.document, path.parent(), gltf.blob.clone()).map_err(|e| perr(e.to_string()))?;

    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut emit = |mesh: gltf::Mesh<'_>, xf: &Matrix4<f64>| -> Result<(), MeshError> {
        for prim in mesh.primitives() {
            if prim.mode() != Mode::Triangles {
                continue;
            }
            let reader = prim.reader(|b| buffers.get(b.index()).map(|d| &d.0[..]));
            let Some(positions) = reader.read_positions() else {
                continue;
            };
            let base = vertices.len() as u32;
            let mut count = 0u32;
            for p in positions {
                let v = xf.transform_point(&Point3::new(p[0] as f64, p[1] as f64, p[2] as f64));
                vertices.push(v);
                count += 1;
            }
            let indices: Vec<u32> = match reader.read_indices() {
                Some(ix) => ix.into_u32().collect(),
                None => (0..count).collect(),
            };
            if !indices.len().is_multiple_of(3) {
                return Err(perr(format!("index count {} is not a multiple of 3", indices.len())));
            }
            for c in indices.chunks_exact(3) {
                if let Some(&bad) = c.iter().find(|&&i| i >= count) {
                    return Err(perr(format!("index {bad} out of range ({count} vertices)")));
                }
                triangles.push([base + c[0], base + c[1], base + c[2]]);
            }
        }
        Ok(())
    };

    let scene = gltf.document.default_scene().or_else(|| gltf.document.scenes().next());
    match scene {
        Some(scene) => {
            let mut stack: Vec<(gltf::Node<'_>, Matrix4<f64>)> =
                scene.nodes().map(|n| (n, Matrix4::identity())).collect();
            while let Some((node, parent)) = stack.pop() {
                let local = node.transform().matrix();
                let local = Matrix4::from_fn(|r, c| local[c][r] as f64);
                let world = parent * local;
                if let Some(mesh) = node.mesh() {
                    emit(mesh, &world)?;
                }
                stack.extend(node.children().map(|c| (c, world)));
            }
        }
        None => {
            for mesh in gltf.document.meshes() {
                emit(mesh, &Matrix4::identity())?;
            }
        }
    }
    TriMesh::new(vertices, triangles)
}

#[cfg(test)]
mod tests {
    use super::super::{import_mesh, MeshFormat};
    use base64_cube::cube_gltf;

    mod base64_cube {
        use base64::Engine;

        /// Minimal glTF with one unit-cube primitive embedded as a data URI.
        pub fn cube_gltf() -> String {
            let positions: [[f32; 3]; 8] = [
                [0., 0., 0.],
                [1., 0., 0.],
                [1., 1., 0.],
                [0., 1., 0.],
                [0., 0., 1.],
                [1., 0., 1.],
                [1., 1., 1.],
                [0., 1., 1.],
            ];
            let indices: [u16; 36] = [
                0, 2, 1, 0, 3, 2, 4, 5, 6, 4, 6, 7, 0, 1, 5, 0, 5, 4, 1, 2, 6, 1, 6, 5, 2, 3, 7, 2, 7, 6, 3, 0, 4, 3,
                4, 7,
            ];
            let mut bytes = Vec::new();
            for p in positions {
                for c in p {
                    bytes.extend_from_slice(&c.to_le_bytes());
                }
            }
            for i in indices {
                bytes.extend_from_slice(&i.to_le_bytes());
            }
            let uri = format!(
                "data:application/octet-stream;base64,{}",
                base64::engine::general_purpose::STANDARD.encode(&bytes)
            );
            format!(
                r#"{{
  "asset": {{"version": "2.0"}},
  "scene": 0,
  "scenes": [{{"nodes": [0]}}],
  "nodes": [{{"mesh": 0, "translation": [2.0, 0.0, 0.0]}}],
  "meshes": [{{"primitives": [{{"attributes": {{"POSITION": 0}}, "indices": 1}}]}}],
  "buffers": [{{"byteLength": {len}, "uri": "{uri}"}}],
  "bufferViews": [
    {{"buffer": 0, "byteOffset": 0, "byteLength": 96}},
    {{"buffer": 0, "byteOffset": 96, "byteLength": 72}}
  ],
  "accessors": [
    {{"bufferView": 0, "componentType": 5126, "count": 8, "type": "VEC3",
      "min": [0.0, 0.0, 0.0], "max": [1.0, 1.0, 1.0]}},
    {{"bufferView": 1, "componentType": 5123, "count": 36, "type": "SCALAR"}}
  ]
}}"#,
                len = bytes.len()
            )
        }
    }

    #[test]
    fn imports_embedded_cube_with_node_transform() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cube.gltf");
        std::fs::write(&path, cube_gltf()).unwrap();
        let m = import_mesh(&path, Some(MeshFormat::Gltf)).unwrap();
        assert_eq!(m.vertex_count(), 8);
        assert_eq!(m.triangle_count(), 12);
        assert!(m.is_watertight());
        let bb = m.bbox();
        assert_eq!(bb.min.x, 2.0);
        assert_eq!(bb.max.x, 3.0);
        let s = super::super::compute_stats(&m);
        assert!((s.volume - 1.0).abs() < 1e-9);
    }
}
