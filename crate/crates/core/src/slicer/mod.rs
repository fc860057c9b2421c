//! Plane slicing of watertight meshes into two closed halves, and splitting
//! of a mesh into its edge-connected components.

mod earcut;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use nalgebra::{Point2, Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{TriMesh, CAP_MATERIAL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SliceError {
    #[error("plane does not intersect the mesh")]
    NoIntersection,
    #[error("input mesh is not watertight")]
    NonWatertightInput,
    #[error("plane only grazes the mesh; one side would be empty")]
    DegenerateCut,
    #[error("invalid plane: {0}")]
    InvalidPlane(String),
}

/// An oriented cutting plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutPlane {
    pub point: Point3<f64>,
    /// Unit normal; the positive side is where it points.
    pub normal: Vector3<f64>,
    /// Display-only rectangle size (m) for UIs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extent: Option<[f64; 2]>,
}

impl CutPlane {
    /// Normalizes `normal`; rejects zero or non-finite input.
    pub fn new(point: Point3<f64>, normal: Vector3<f64>) -> Result<Self, SliceError> {
        let len = normal.norm();
        if !(len.is_finite() && len > 1e-12) || !point.coords.iter().all(|c| c.is_finite()) {
            return Err(SliceError::InvalidPlane(format!(
                "point {:?} normal {:?}",
                point.coords.as_slice(),
                normal.as_slice()
            )));
        }
        Ok(Self { point, normal: normal / len, extent: None })
    }

    pub fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        self.normal.dot(&(p - self.point))
    }

    fn project(&self, p: &Point3<f64>) -> Point3<f64> {
        p - self.normal * self.signed_distance(p)
    }
}

impl FromStr for CutPlane {
    type Err = SliceError;

    /// Parses `px,py,pz,nx,ny,nz`.
    fn from_str(s: &str) -> Result<Self, SliceError> {
        let vals: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| SliceError::InvalidPlane(format!("{s:?}: {e}")))?;
        if vals.len() != 6 {
            return Err(SliceError::InvalidPlane(format!(
                "{s:?}: expected 6 comma-separated numbers, got {}",
                vals.len()
            )));
        }
        CutPlane::new(Point3::new(vals[0], vals[1], vals[2]), Vector3::new(vals[3], vals[4], vals[5]))
    }
}

/// Which piece of an operation a segment came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SegmentLabel {
    Whole,
    PositiveSide,
    NegativeSide,
    Auto(u32),
    Component(u32),
}

impl fmt::Display for SegmentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Whole => f.write_str("whole"),
            Self::PositiveSide => f.write_str("positive-side"),
            Self::NegativeSide => f.write_str("negative-side"),
            Self::Auto(k) => write!(f, "auto-{k}"),
            Self::Component(k) => write!(f, "component-{k}"),
        }
    }
}

impl FromStr for SegmentLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "whole" => Ok(Self::Whole),
            "positive-side" => Ok(Self::PositiveSide),
            "negative-side" => Ok(Self::NegativeSide),
            _ => {
                let num = |p: &str| s.strip_prefix(p).and_then(|n| n.parse::<u32>().ok());
                num("auto-")
                    .map(Self::Auto)
                    .or_else(|| num("component-").map(Self::Component))
                    .ok_or_else(|| format!("unknown segment label {s:?}"))
            }
        }
    }
}

impl Serialize for SegmentLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SegmentLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Imported,
    Manual,
    Automatic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPart {
    pub label: SegmentLabel,
    pub mesh: TriMesh,
    /// Number of cross-section loops closed with cap faces.
    pub cap_loops: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSet {
    pub provenance: Provenance,
    pub parts: Vec<SegmentPart>,
}

/// Cuts a watertight mesh into the parts on the positive and negative side
/// of `plane`, closing each cross-section with cap triangles tagged
/// [`CAP_MATERIAL`]. Returns `[positive, negative]`.
///
/// Vertices within 1e-9 × bbox diagonal of the plane are snapped onto it.
/// Faces lying in the plane go to the half their outward normal points away
/// from, so a face with normal +n belongs to the negative half.
pub fn slice_by_plane(mesh: &TriMesh, plane: &CutPlane) -> Result<SegmentSet, SliceError> {
    if !mesh.is_watertight() {
        return Err(SliceError::NonWatertightInput);
    }
    let eps = 1e-9 * mesh.bbox().diagonal();
    let n = plane.normal;

    let mut verts: Vec<Point3<f64>> = mesh.vertices().to_vec();
    let mut dist: Vec<f64> = verts.iter().map(|p| plane.signed_distance(p)).collect();
    let side: Vec<i8> = dist
        .iter()
        .map(|&d| {
            if d.abs() <= eps {
                0
            } else if d > 0.0 {
                1
            } else {
                -1
            }
        })
        .collect();
    for (i, s) in side.iter().enumerate() {
        if *s == 0 {
            verts[i] = plane.project(&verts[i]);
            dist[i] = 0.0;
        }
    }
    let used: Vec<bool> = {
        let mut u = vec![false; verts.len()];
        mesh.triangles().iter().flatten().for_each(|&i| u[i as usize] = true);
        u
    };
    let has = |s: i8| side.iter().zip(&used).any(|(x, u)| *u && *x == s);
    let (any_pos, any_neg, any_zero) = (has(1), has(-1), has(0));
    if !any_pos || !any_neg {
        return Err(if any_zero { SliceError::DegenerateCut } else { SliceError::NoIntersection });
    }

    let mut cut_points: HashMap<(u32, u32), u32> = HashMap::new();
    let mut crossing = |a: u32, b: u32, verts: &mut Vec<Point3<f64>>| -> u32 {
        let (lo, hi) = (a.min(b), a.max(b));
        *cut_points.entry((lo, hi)).or_insert_with(|| {
            let (dl, dh) = (dist[lo as usize], dist[hi as usize]);
            let t = dl / (dl - dh);
            let (pl, ph) = (verts[lo as usize], verts[hi as usize]);
            verts.push(plane.project(&(pl + (ph - pl) * t)));
            (verts.len() - 1) as u32
        })
    };

    let mut pos: Vec<([u32; 3], u32)> = Vec::new();
    let mut neg: Vec<([u32; 3], u32)> = Vec::new();
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let mat = mesh.material(t);
        let s = tri.map(|i| side[i as usize]);
        let has_pos = s.contains(&1);
        let has_neg = s.contains(&-1);
        let mut put = |sd: i8, tri: [u32; 3]| {
            if sd > 0 {
                pos.push((tri, mat))
            } else {
                neg.push((tri, mat))
            }
        };
        match (has_pos, has_neg) {
            (true, false) => put(1, *tri),
            (false, true) => put(-1, *tri),
            (false, false) => {
                let sd = if mesh.area_vector(t).dot(&n) > 0.0 { -1 } else { 1 };
                put(sd, *tri);
            }
            (true, true) => {
                if let Some(k) = (0..3).find(|&k| s[k] == 0) {
                    let (z, p, q) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
                    let x = crossing(p, q, &mut verts);
                    put(s[(k + 1) % 3], [z, p, x]);
                    put(s[(k + 2) % 3], [z, x, q]);
                } else {
                    let k = (0..3).find(|&k| s[k] != s[(k + 1) % 3] && s[k] != s[(k + 2) % 3]).unwrap();
                    let (l, o1, o2) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
                    let x1 = crossing(l, o1, &mut verts);
                    let x2 = crossing(l, o2, &mut verts);
                    put(s[k], [l, x1, x2]);
                    put(-s[k], [x1, o1, o2]);
                    put(-s[k], [x1, o2, x2]);
                }
            }
        }
    }

    let positive = close_half(&verts, pos, -n);
    let negative = close_half(&verts, neg, n);
    Ok(SegmentSet {
        provenance: Provenance::Manual,
        parts: vec![
            SegmentPart { label: SegmentLabel::PositiveSide, mesh: positive.0, cap_loops: positive.1 },
            SegmentPart { label: SegmentLabel::NegativeSide, mesh: negative.0, cap_loops: negative.1 },
        ],
    })
}

/// Adds cap faces with outward normal `cap_normal` over every boundary
/// loop of the half, then compacts it. Returns the mesh and loop count.
fn close_half(verts: &[Point3<f64>], mut tris: Vec<([u32; 3], u32)>, cap_normal: Vector3<f64>) -> (TriMesh, usize) {
    // Directed boundary edges: an edge used once by the half.
    let mut uses: HashMap<(u32, u32), (u32, u32, usize)> = HashMap::new();
    for (tri, _) in &tris {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let e = uses.entry((a.min(b), a.max(b))).or_insert((a, b, 0));
            e.2 += 1;
        }
    }
    // Cap loops run against the boundary, so store reversed edges b→a.
    let mut next: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    let mut boundary: Vec<(u32, u32)> = uses.values().filter(|e| e.2 == 1).map(|&(a, b, _)| (b, a)).collect();
    boundary.sort_unstable();
    for &(a, b) in &boundary {
        next.entry(a).or_default().push(b);
    }

    let u = any_perpendicular(&cap_normal);
    let v = cap_normal.cross(&u);
    let origin = boundary.first().map_or(Point3::origin(), |&(a, _)| verts[a as usize]);
    let to2d = |i: u32| {
        let d = verts[i as usize] - origin;
        Point2::new(d.dot(&u), d.dot(&v))
    };

    let mut loops: Vec<Vec<u32>> = Vec::new();
    while let Some(&start) = next.iter().find(|(_, out)| !out.is_empty()).map(|(k, _)| k) {
        let mut ring = vec![start];
        let mut prev: Option<u32> = None;
        let mut cur = start;
        loop {
            let outs = next.get_mut(&cur).unwrap();
            let pick = match prev {
                Some(p) if outs.len() > 1 => {
                    // Pinch vertex: take the sharpest left turn so loops stay simple.
                    let (pc, cc) = (to2d(p), to2d(cur));
                    let din = cc - pc;
                    (0..outs.len())
                        .max_by(|&i, &j| {
                            let turn = |w: u32| {
                                let dout = to2d(w) - cc;
                                (din.x * dout.y - din.y * dout.x).atan2(din.dot(&dout))
                            };
                            turn(outs[i]).total_cmp(&turn(outs[j]))
                        })
                        .unwrap()
                }
                _ => 0,
            };
            let nxt = outs.swap_remove(pick);
            if nxt == start {
                break;
            }
            ring.push(nxt);
            prev = Some(cur);
            cur = nxt;
            if next.get(&cur).is_none_or(|o| o.is_empty()) {
                break;
            }
        }
        if ring.len() >= 3 {
            loops.push(ring);
        }
    }

    let mut pts: Vec<Point2<f64>> = Vec::new();
    let mut ids: Vec<u32> = Vec::new();
    let rings: Vec<Vec<usize>> = loops
        .iter()
        .map(|l| {
            l.iter()
                .map(|&i| {
                    pts.push(to2d(i));
                    ids.push(i);
                    pts.len() - 1
                })
                .collect()
        })
        .collect();
    let areas: Vec<f64> = rings.iter().map(|r| earcut::signed_area2(&pts, r)).collect();
    let outers: Vec<usize> = (0..rings.len()).filter(|&i| areas[i] > 0.0).collect();
    let mut holes_of: Vec<Vec<Vec<usize>>> = vec![Vec::new(); rings.len()];
    for h in (0..rings.len()).filter(|&i| areas[i] <= 0.0) {
        let probe = {
            let (a, b) = (pts[rings[h][0]], pts[rings[h][1]]);
            Point2::from((a.coords + b.coords) / 2.0)
        };
        let owner = outers
            .iter()
            .filter(|&&o| earcut::point_in_ring(&pts, &rings[o], &probe))
            .min_by(|&&a, &&b| areas[a].total_cmp(&areas[b]));
        match owner {
            Some(&o) => holes_of[o].push(rings[h].clone()),
            None => log::warn!("cap loop with no enclosing outer loop skipped"),
        }
    }
    for &o in &outers {
        for t in earcut::triangulate(&pts, &rings[o], &holes_of[o]) {
            tris.push((t.map(|i| ids[i]), CAP_MATERIAL));
        }
    }

    let mut remap: HashMap<u32, u32> = HashMap::new();
    let mut out_v = Vec::new();
    let mut out_t = Vec::with_capacity(tris.len());
    let mut out_m = Vec::with_capacity(tris.len());
    for (tri, m) in tris {
        out_t.push(tri.map(|i| {
            *remap.entry(i).or_insert_with(|| {
                out_v.push(verts[i as usize]);
                (out_v.len() - 1) as u32
            })
        }));
        out_m.push(m);
    }
    (TriMesh::from_parts(out_v, out_t, Some(out_m)), loops.len())
}

fn any_perpendicular(n: &Vector3<f64>) -> Vector3<f64> {
    let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    n.cross(&helper).normalize()
}

/// One segment per edge-connected component, ordered by lowest triangle index.
pub fn split_disconnected(segment: &TriMesh) -> SegmentSet {
    let (labels, count) = segment.triangle_components();
    let mut groups: Vec<Vec<u32>> = vec![Vec::new(); count];
    for (t, l) in labels.iter().enumerate() {
        groups[*l as usize].push(t as u32);
    }
    SegmentSet {
        provenance: Provenance::Manual,
        parts: groups
            .iter()
            .enumerate()
            .map(|(i, g)| SegmentPart {
                label: if count == 1 { SegmentLabel::Whole } else { SegmentLabel::Component(i as u32) },
                mesh: segment.submesh(g),
                cap_loops: 0,
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{compute_stats, shapes};

    fn plane(p: [f64; 3], n: [f64; 3]) -> CutPlane {
        CutPlane::new(Point3::from(p), Vector3::from(n)).unwrap()
    }

    #[test]
    fn cube_bisection() {
        let set = slice_by_plane(&shapes::unit_cube(), &plane([0.0, 0.0, 0.5], [0.0, 0.0, 1.0])).unwrap();
        assert_eq!(set.parts.len(), 2);
        for part in &set.parts {
            let s = compute_stats(&part.mesh);
            assert!(s.watertight);
            assert!((s.volume - 0.5).abs() < 1e-12);
            assert_eq!(part.cap_loops, 1);
        }
        assert_eq!(set.parts[0].label, SegmentLabel::PositiveSide);
        assert!(set.parts[0].mesh.bbox().min.z >= 0.5 - 1e-12);
    }

    #[test]
    fn plane_outside_is_no_intersection() {
        let err = slice_by_plane(&shapes::unit_cube(), &plane([0.0, 0.0, 2.0], [0.0, 0.0, 1.0]));
        assert_eq!(err.unwrap_err(), SliceError::NoIntersection);
    }

    #[test]
    fn plane_on_face_is_degenerate() {
        let err = slice_by_plane(&shapes::unit_cube(), &plane([0.0, 0.0, 1.0], [0.0, 0.0, 1.0]));
        assert_eq!(err.unwrap_err(), SliceError::DegenerateCut);
    }

    #[test]
    fn open_mesh_rejected() {
        let open = shapes::unit_cube().submesh(&[0, 1, 2]);
        let err = slice_by_plane(&open, &plane([0.5, 0.5, 0.5], [0.0, 0.0, 1.0]));
        assert_eq!(err.unwrap_err(), SliceError::NonWatertightInput);
    }

    #[test]
    fn icosphere_quarter_cut_conserves_volume() {
        let m = shapes::icosphere(1.0, 3);
        let v = compute_stats(&m).volume;
        let set = slice_by_plane(&m, &plane([0.0, 0.0, 0.25], [0.0, 0.0, 1.0])).unwrap();
        let mut total = 0.0;
        for part in &set.parts {
            let s = compute_stats(&part.mesh);
            assert!(s.watertight);
            assert_eq!(part.cap_loops, 1);
            total += s.volume;
        }
        assert!((total - v).abs() <= 1e-6 * v);
    }

    #[test]
    fn cap_faces_are_planar_and_tagged() {
        let m = shapes::icosphere(1.0, 2);
        let p = plane([0.1, -0.2, 0.3], [1.0, 2.0, -0.5]);
        let set = slice_by_plane(&m, &p).unwrap();
        let eps = 1e-9 * m.bbox().diagonal();
        for part in &set.parts {
            let mesh = &part.mesh;
            let caps: Vec<usize> = (0..mesh.triangle_count()).filter(|&t| mesh.material(t) == CAP_MATERIAL).collect();
            assert!(!caps.is_empty());
            for t in caps {
                for c in mesh.corners(t) {
                    assert!(p.signed_distance(&c).abs() <= eps);
                }
            }
        }
    }

    #[test]
    fn torus_cut_through_hole_makes_annulus_caps() {
        let m = shapes::torus(0.3, 0.1, 48, 24);
        let v = compute_stats(&m).volume;
        // Horizontal cut: the cross-section is an annulus (outer loop + hole).
        let set = slice_by_plane(&m, &plane([0.0, 0.03, 0.0], [0.0, 1.0, 0.0])).unwrap();
        let total: f64 = set.parts.iter().map(|p| compute_stats(&p.mesh).volume).sum();
        assert!((total - v).abs() <= 1e-6 * v);
        for part in &set.parts {
            assert_eq!(part.cap_loops, 2);
            assert!(part.mesh.is_watertight());
        }
    }

    #[test]
    fn coplanar_faces_follow_their_normal() {
        // Cut exactly at an internal grid plane of a two-cell block stack.
        let m = shapes::blocks(&[0.0, 1.0], &[0.0, 1.0, 2.0], &[0.0, 1.0], &[[0, 0, 0], [0, 1, 0]]);
        let set = slice_by_plane(&m, &plane([0.0, 1.0, 0.0], [0.0, 1.0, 0.0])).unwrap();
        for part in &set.parts {
            let s = compute_stats(&part.mesh);
            assert!(s.watertight);
            assert!((s.volume - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn second_cut_with_same_plane_is_rejected() {
        let m = shapes::icosphere(1.0, 2);
        let p = plane([0.0, 0.2, 0.0], [0.3, 1.0, 0.1]);
        let set = slice_by_plane(&m, &p).unwrap();
        for part in &set.parts {
            let err = slice_by_plane(&part.mesh, &p).unwrap_err();
            assert!(matches!(err, SliceError::DegenerateCut | SliceError::NoIntersection));
        }
    }

    #[test]
    fn split_components() {
        let a = shapes::unit_cube();
        let b = a.translated(Vector3::new(3.0, 0.0, 0.0));
        assert_eq!(split_disconnected(&TriMesh::merge(&[&a, &b])).parts.len(), 2);
        let t = split_disconnected(&shapes::torus(0.3, 0.1, 16, 8));
        assert_eq!(t.parts.len(), 1);
        assert_eq!(t.parts[0].label, SegmentLabel::Whole);
    }

    #[test]
    fn bridge_cut_below_beam_gives_three_pieces() {
        let m = shapes::bridge();
        let set = slice_by_plane(&m, &plane([0.0, 0.15, 0.0], [0.0, 1.0, 0.0])).unwrap();
        let pieces: usize = set.parts.iter().map(|p| split_disconnected(&p.mesh).parts.len()).sum();
        assert_eq!(pieces, 3);
    }

    #[test]
    fn plane_parsing() {
        let p: CutPlane = "0,0,0.5,0,0,2".parse().unwrap();
        assert_eq!(p.normal, Vector3::z());
        assert!("1,2,3".parse::<CutPlane>().is_err());
        assert!("0,0,0,0,0,0".parse::<CutPlane>().is_err());
        assert!("a,0,0,0,0,1".parse::<CutPlane>().is_err());
    }

    #[test]
    fn labels_round_trip_as_strings() {
        for l in [
            SegmentLabel::Whole,
            SegmentLabel::PositiveSide,
            SegmentLabel::NegativeSide,
            SegmentLabel::Auto(3),
            SegmentLabel::Component(0),
        ] {
            let s = serde_json::to_string(&l).unwrap();
            assert_eq!(serde_json::from_str::<SegmentLabel>(&s).unwrap(), l);
        }
    }
}
