//! Procedural watertight test and demo shapes. All outputs are outward-wound.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use super::{signed_volume_about, TriMesh};

fn outward(mesh: TriMesh) -> TriMesh {
    let c = mesh.bbox().center();
    if signed_volume_about(&mesh, &c) < 0.0 {
        mesh.flipped()
    } else {
        mesh
    }
}

/// Axis-aligned unit cube spanning [0,1]³: 8 vertices, 12 triangles.
pub fn unit_cube() -> TriMesh {
    let v = [
        [0., 0., 0.],
        [1., 0., 0.],
        [1., 1., 0.],
        [0., 1., 0.],
        [0., 0., 1.],
        [1., 0., 1.],
        [1., 1., 1.],
        [0., 1., 1.],
    ]
    .map(Point3::from);
    let t = vec![
        [0, 2, 1],
        [0, 3, 2],
        [4, 5, 6],
        [4, 6, 7],
        [0, 1, 5],
        [0, 5, 4],
        [1, 2, 6],
        [1, 6, 5],
        [2, 3, 7],
        [2, 7, 6],
        [3, 0, 4],
        [3, 4, 7],
    ];
    TriMesh::from_parts(v.to_vec(), t, None)
}

/// Box with the given center and edge lengths.
pub fn cuboid(center: Point3<f64>, size: Vector3<f64>) -> TriMesh {
    let cube = unit_cube();
    let vertices =
        cube.vertices().iter().map(|p| center + (p.coords - Vector3::repeat(0.5)).component_mul(&size)).collect();
    TriMesh::from_parts(vertices, cube.triangles().to_vec(), None)
}

pub fn tetrahedron() -> TriMesh {
    let v = vec![
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(0.0, 1.0, 0.0),
        Point3::new(0.0, 0.0, 1.0),
    ];
    outward(TriMesh::from_parts(v, vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]], None))
}

/// Icosahedron subdivided `subdivisions` times and projected onto the sphere:
/// 20·4ⁿ triangles.
pub fn icosphere(radius: f64, subdivisions: u32) -> TriMesh {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vector3<f64>> = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ]
    .iter()
    .map(|v| Vector3::from(*v).normalize())
    .collect();
    let mut tris: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vector3<f64>>| {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalize());
                (verts.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(tris.len() * 4);
        for [a, b, c] in tris {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        tris = next;
    }
    let vertices = verts.into_iter().map(|v| Point3::from(v * radius)).collect();
    outward(TriMesh::from_parts(vertices, tris, None))
}

/// Torus around the Y axis.
pub fn torus(major: f64, minor: f64, around: u32, tube: u32) -> TriMesh {
    let (nu, nv) = (around as usize, tube as usize);
    let mut vertices = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = i as f64 / nu as f64 * std::f64::consts::TAU;
        for j in 0..nv {
            let v = j as f64 / nv as f64 * std::f64::consts::TAU;
            let r = major + minor * v.cos();
            vertices.push(Point3::new(r * u.cos(), minor * v.sin(), r * u.sin()));
        }
    }
    let idx = |i: usize, j: usize| ((i % nu) * nv + (j % nv)) as u32;
    let mut tris = Vec::with_capacity(nu * nv * 2);
    for i in 0..nu {
        for j in 0..nv {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            tris.push([a, b, c]);
            tris.push([a, c, d]);
        }
    }
    outward(TriMesh::from_parts(vertices, tris, None))
}

/// Surface of revolution around the Y axis. `profile` lists (radius, y)
/// pairs from bottom to top; the ends are closed with pole vertices.
pub fn revolve(profile: &[(f64, f64)], segments: u32) -> TriMesh {
    let n = segments as usize;
    let rings: Vec<(f64, f64)> = profile.iter().copied().filter(|(r, _)| *r > 0.0).collect();
    let y_bottom = profile.first().map_or(0.0, |p| p.1);
    let y_top = profile.last().map_or(0.0, |p| p.1);
    let mut vertices = vec![Point3::new(0.0, y_bottom, 0.0)];
    for &(r, y) in &rings {
        for s in 0..n {
            let a = s as f64 / n as f64 * std::f64::consts::TAU;
            vertices.push(Point3::new(r * a.cos(), y, r * a.sin()));
        }
    }
    let top = vertices.len() as u32;
    vertices.push(Point3::new(0.0, y_top, 0.0));
    let ring = |k: usize, s: usize| (1 + k * n + s % n) as u32;
    let mut tris = Vec::new();
    for s in 0..n {
        tris.push([0, ring(0, s), ring(0, s + 1)]);
    }
    for k in 0..rings.len() - 1 {
        for s in 0..n {
            tris.push([ring(k, s), ring(k + 1, s), ring(k + 1, s + 1)]);
            tris.push([ring(k, s), ring(k + 1, s + 1), ring(k, s + 1)]);
        }
    }
    let last = rings.len() - 1;
    for s in 0..n {
        tris.push([top, ring(last, s + 1), ring(last, s)]);
    }
    outward(TriMesh::from_parts(vertices, tris, None))
}

/// Two spherical bulbs on the Y axis joined by a cylindrical neck, with a
/// sharp concave crease where the neck meets each bulb.
pub fn dumbbell(
    bulb_radius: f64,
    half_distance: f64,
    neck_radius: f64,
    segments: u32,
    bulb_rings: u32,
    neck_rings: u32,
) -> TriMesh {
    assert!(neck_radius < bulb_radius);
    let (big_r, c, r) = (bulb_radius, half_distance, neck_radius);
    // Polar angle (from the outer pole) at which a bulb meets the neck.
    let meet = std::f64::consts::PI - (r / big_r).asin();
    let mut profile = Vec::new();
    for k in 0..=bulb_rings {
        let a = meet * k as f64 / bulb_rings as f64;
        profile.push((big_r * a.sin(), -c - big_r * a.cos()));
    }
    let y0 = profile.last().unwrap().1;
    for k in 1..neck_rings {
        let y = y0 + (-2.0 * y0) * k as f64 / neck_rings as f64;
        profile.push((r, y));
    }
    for k in (0..=bulb_rings).rev() {
        let a = meet * k as f64 / bulb_rings as f64;
        profile.push((big_r * a.sin(), c + big_r * a.cos()));
    }
    profile[0].0 = 0.0;
    profile.last_mut().unwrap().0 = 0.0;
    revolve(&profile, segments)
}

/// Union of axis-aligned cells on a rectilinear grid. `xs`, `ys`, `zs` are
/// the grid coordinates; each cell `[i, j, k]` spans `xs[i]..xs[i+1]` etc.
/// Cells must not touch only along an edge or corner.
pub fn blocks(xs: &[f64], ys: &[f64], zs: &[f64], cells: &[[usize; 3]]) -> TriMesh {
    let (nx, ny, nz) = (xs.len() - 1, ys.len() - 1, zs.len() - 1);
    let mut filled = vec![false; nx * ny * nz];
    let cell_ix = |i: usize, j: usize, k: usize| (i * ny + j) * nz + k;
    for &[i, j, k] in cells {
        filled[cell_ix(i, j, k)] = true;
    }
    let is_filled = |i: isize, j: isize, k: isize| {
        i >= 0
            && j >= 0
            && k >= 0
            && (i as usize) < nx
            && (j as usize) < ny
            && (k as usize) < nz
            && filled[cell_ix(i as usize, j as usize, k as usize)]
    };
    let mut node_ids: HashMap<[usize; 3], u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut node = |n: [usize; 3], vertices: &mut Vec<Point3<f64>>| {
        *node_ids.entry(n).or_insert_with(|| {
            vertices.push(Point3::new(xs[n[0]], ys[n[1]], zs[n[2]]));
            (vertices.len() - 1) as u32
        })
    };
    let mut tris = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            for k in 0..nz {
                if !filled[cell_ix(i, j, k)] {
                    continue;
                }
                let (ii, jj, kk) = (i as isize, j as isize, k as isize);
                // (axis, positive side) → quad corners listed CCW around the outward normal
                let faces: [(bool, [[usize; 3]; 4]); 6] = [
                    (
                        !is_filled(ii + 1, jj, kk),
                        [[i + 1, j, k], [i + 1, j + 1, k], [i + 1, j + 1, k + 1], [i + 1, j, k + 1]],
                    ),
                    (!is_filled(ii - 1, jj, kk), [[i, j, k], [i, j, k + 1], [i, j + 1, k + 1], [i, j + 1, k]]),
                    (
                        !is_filled(ii, jj + 1, kk),
                        [[i, j + 1, k], [i, j + 1, k + 1], [i + 1, j + 1, k + 1], [i + 1, j + 1, k]],
                    ),
                    (!is_filled(ii, jj - 1, kk), [[i, j, k], [i + 1, j, k], [i + 1, j, k + 1], [i, j, k + 1]]),
                    (
                        !is_filled(ii, jj, kk + 1),
                        [[i, j, k + 1], [i + 1, j, k + 1], [i + 1, j + 1, k + 1], [i, j + 1, k + 1]],
                    ),
                    (!is_filled(ii, jj, kk - 1), [[i, j, k], [i, j + 1, k], [i + 1, j + 1, k], [i + 1, j, k]]),
                ];
                for (open, quad) in faces {
                    if open {
                        let q = quad.map(|n| node(n, &mut vertices));
                        tris.push([q[0], q[1], q[2]]);
                        tris.push([q[0], q[2], q[3]]);
                    }
                }
            }
        }
    }
    TriMesh::from_parts(vertices, tris, None)
}

/// Arch: two pillars joined by a thin beam across the top. A horizontal cut
/// below the beam leaves the two pillar feet as separate islands.
pub fn bridge() -> TriMesh {
    let xs = [0.0, 0.1, 0.3, 0.4];
    let ys = [0.0, 0.1, 0.2, 0.23];
    let zs = [0.0, 0.1];
    let cells = [[0, 0, 0], [0, 1, 0], [0, 2, 0], [1, 2, 0], [2, 2, 0], [2, 1, 0], [2, 0, 0]];
    blocks(&xs, &ys, &zs, &cells)
}

/// Open flat square grid in the XZ plane, `n`×`n` quads.
pub fn grid_plane(n: u32, size: f64) -> TriMesh {
    let n = n as usize;
    let mut vertices = Vec::new();
    for i in 0..=n {
        for j in 0..=n {
            vertices.push(Point3::new(size * i as f64 / n as f64, 0.0, size * j as f64 / n as f64));
        }
    }
    let id = |i: usize, j: usize| (i * (n + 1) + j) as u32;
    let mut tris = Vec::new();
    for i in 0..n {
        for j in 0..n {
            tris.push([id(i, j), id(i, j + 1), id(i + 1, j + 1)]);
            tris.push([id(i, j), id(i + 1, j + 1), id(i + 1, j)]);
        }
    }
    TriMesh::from_parts(vertices, tris, None)
}

/// Two triangles sharing the edge along Z, opened to `angle` radians between
/// their planes. Both face the same side, so π is flat.
pub fn folded_pair(angle: f64) -> TriMesh {
    let vertices = vec![
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(0.0, 0.0, 1.0),
        Point3::new(1.0, 0.0, 0.5),
        Point3::new(angle.cos(), angle.sin(), 0.5),
    ];
    TriMesh::from_parts(vertices, vec![[0, 1, 2], [1, 0, 3]], None)
}

#[cfg(test)]
mod tests {
    use super::super::compute_stats;
    use super::*;

    #[test]
    fn fixtures_are_watertight_and_outward() {
        for (name, m) in [
            ("cube", unit_cube()),
            ("tet", tetrahedron()),
            ("ico", icosphere(1.0, 2)),
            ("torus", torus(0.3, 0.1, 24, 12)),
            ("dumbbell", dumbbell(0.05, 0.1, 0.02, 16, 8, 6)),
            ("bridge", bridge()),
        ] {
            let s = compute_stats(&m);
            assert!(s.watertight, "{name}");
            assert!(s.volume > 0.0, "{name}");
            assert_eq!(s.component_count, 1, "{name}");
        }
    }

    #[test]
    fn bridge_volume_is_cell_sum() {
        let s = compute_stats(&bridge());
        let expected = 0.1 * 0.2 * 0.1 * 2.0 + 0.4 * 0.03 * 0.1;
        assert!((s.volume - expected).abs() < 1e-12);
    }

    #[test]
    fn torus_volume_near_analytic() {
        let s = compute_stats(&torus(0.3, 0.1, 96, 48));
        let exact = 2.0 * std::f64::consts::PI.powi(2) * 0.3 * 0.01;
        assert!((s.volume - exact).abs() / exact < 0.01);
    }
}
