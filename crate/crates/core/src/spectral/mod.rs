//! Automatic segmentation by spectral clustering of the triangle dual graph.
//!
//! Pipeline: [`build_dual_graph`] → [`spectral_embed`] → [`select_k`] →
//! k-means on the leading eigenvectors → connectivity repair. The whole
//! chain is single-threaded and seeded, so results are reproducible bit for
//! bit on one platform.

mod eigen;
mod kmeans;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::TriMesh;
use crate::slicer::{Provenance, SegmentLabel, SegmentPart, SegmentSet};

pub use eigen::{Laplacian, DENSE_LIMIT};

pub const DEFAULT_DELTA: f64 = 0.5;
pub const DEFAULT_K_MAX: usize = 10;
pub const DEFAULT_SEED: u64 = 42;
/// Eigenvalues below this count as zero.
pub const ZERO_EIGENVALUE: f64 = 1e-9;

const CONCAVE_WEIGHT: f64 = 1.0;
const CONVEX_WEIGHT: f64 = 0.2;
const REPAIR_PASSES: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("mesh has {0} triangles; at least 2 are needed")]
    TooFewTriangles(usize),
    #[error("eigensolver failed: {0}")]
    ConvergenceFailure(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualEdge {
    pub a: u32,
    pub b: u32,
    /// centroid → shared-edge midpoint → centroid distance (m)
    pub geo: f64,
    /// (1 − cos dihedral) × concavity factor
    pub ang: f64,
    pub weight: f64,
    pub affinity: f64,
}

/// One node per triangle, one edge per interior mesh edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualGraph {
    node_count: usize,
    edges: Vec<DualEdge>,
}

impl DualGraph {
    /// A graph with given affinities and no geometric terms; for tests and
    /// non-mesh inputs.
    pub fn from_affinity(node_count: usize, edges: Vec<(u32, u32, f64)>) -> Self {
        let edges = edges
            .into_iter()
            .map(|(a, b, affinity)| DualEdge { a, b, geo: 0.0, ang: 0.0, weight: 0.0, affinity })
            .collect();
        Self { node_count, edges }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[DualEdge] {
        &self.edges
    }

    pub fn edge(&self, i: u32, j: u32) -> Option<&DualEdge> {
        self.edges.iter().find(|e| (e.a, e.b) == (i, j) || (e.a, e.b) == (j, i))
    }

    /// Connected components over edges with positive affinity.
    pub fn component_count(&self) -> usize {
        let mut uf = crate::mesh::UnionFind::new(self.node_count);
        for e in self.edges.iter().filter(|e| e.affinity > 0.0) {
            uf.union(e.a as usize, e.b as usize);
        }
        uf.labels().1
    }
}

/// Dissimilarity graph over adjacent triangles:
/// `w = δ·geo/mean(geo) + (1−δ)·ang/mean(ang)` and affinity
/// `exp(−w²/(2σ²))` with σ the mean weight. Concave folds keep their full
/// angular term, convex ones are scaled by 0.2.
pub fn build_dual_graph(mesh: &TriMesh, delta: f64) -> Result<DualGraph, SpectralError> {
    if mesh.triangle_count() < 2 {
        return Err(SpectralError::TooFewTriangles(mesh.triangle_count()));
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(SpectralError::InvalidParameter(format!("delta {delta} outside [0, 1]")));
    }
    let mut edges: Vec<DualEdge> = mesh
        .interior_edges()
        .into_iter()
        .map(|(a, b, [lo, hi])| {
            let (ca, cb) = (mesh.centroid(a as usize), mesh.centroid(b as usize));
            let mid = nalgebra::center(&mesh.vertices()[lo as usize], &mesh.vertices()[hi as usize]);
            let geo = (mid - ca).norm() + (cb - mid).norm();
            let (na, nb) = (mesh.triangle_normal(a as usize), mesh.triangle_normal(b as usize));
            let raw = (1.0 - na.dot(&nb)).max(0.0);
            let concave = (cb - ca).dot(&na) > 0.0;
            let ang = raw * if concave { CONCAVE_WEIGHT } else { CONVEX_WEIGHT };
            DualEdge { a, b, geo, ang, weight: 0.0, affinity: 0.0 }
        })
        .collect();
    let m = edges.len().max(1) as f64;
    let mean_geo = edges.iter().map(|e| e.geo).sum::<f64>() / m;
    let mean_ang = edges.iter().map(|e| e.ang).sum::<f64>() / m;
    for e in &mut edges {
        let g = if mean_geo > 0.0 { e.geo / mean_geo } else { 0.0 };
        let a = if mean_ang > 0.0 { e.ang / mean_ang } else { 0.0 };
        e.weight = delta * g + (1.0 - delta) * a;
    }
    let sigma = edges.iter().map(|e| e.weight).sum::<f64>() / m;
    for e in &mut edges {
        e.affinity = if sigma > 0.0 { (-(e.weight * e.weight) / (2.0 * sigma * sigma)).exp() } else { 1.0 };
    }
    Ok(DualGraph { node_count: mesh.triangle_count(), edges })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralEmbedding {
    /// Ascending, within [0, 2].
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[j][node]` pairs with `eigenvalues[j]`.
    pub eigenvectors: Vec<Vec<f64>>,
}

impl SpectralEmbedding {
    pub fn zero_multiplicity(&self) -> usize {
        self.eigenvalues.iter().filter(|&&l| l < ZERO_EIGENVALUE).count()
    }
}

/// The `k_max + 1` smallest eigenpairs of the normalized Laplacian (fewer if
/// the graph is smaller). Dense below [`DENSE_LIMIT`] nodes, otherwise
/// shift-invert subspace iteration.
pub fn spectral_embed(graph: &DualGraph, k_max: usize) -> Result<SpectralEmbedding, SpectralError> {
    if k_max < 1 {
        return Err(SpectralError::InvalidParameter("k_max must be at least 1".into()));
    }
    let lap = Laplacian::new(graph);
    let (eigenvalues, eigenvectors) = eigen::smallest_eigenpairs(&lap, k_max + 1)?;
    Ok(SpectralEmbedding { eigenvalues, eigenvectors })
}

/// Eigengap choice of the segment count: with eigenvalues λ₀ ≤ λ₁ ≤ …,
/// picks the k in [1, k_max] maximizing λ_k − λ_{k−1} (first on ties).
///
/// When the graph is already disconnected (m ≥ 2 zero eigenvalues) the
/// answer is m: the components are the segments, and the gap rule would
/// otherwise split each smooth component along its own harmonics.
pub fn select_k(embedding: &SpectralEmbedding, k_max: usize) -> usize {
    let m = embedding.zero_multiplicity();
    if m >= 2 {
        return m;
    }
    let ev = &embedding.eigenvalues;
    let top = k_max.min(ev.len().saturating_sub(1));
    let mut best = (f64::NEG_INFINITY, 1usize);
    for k in 1..=top {
        let gap = ev[k] - ev[k - 1];
        if gap > best.0 {
            best = (gap, k);
        }
    }
    best.1.clamp(1, k_max.max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentationMethod {
    Auto,
    ForcedK,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    /// Per-triangle label in `0..k`, numbered by first appearance.
    pub labels: Vec<u32>,
    pub k: usize,
    pub method: SegmentationMethod,
    /// Cluster count requested from k-means (before connectivity repair).
    pub requested_k: usize,
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentParams {
    pub delta: f64,
    pub k: Option<usize>,
    pub k_max: usize,
    pub seed: u64,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self { delta: DEFAULT_DELTA, k: None, k_max: DEFAULT_K_MAX, seed: DEFAULT_SEED }
    }
}

/// Full automatic segmentation with default `k_max`.
pub fn segment_auto(mesh: &TriMesh, delta: f64, k: Option<usize>, seed: u64) -> Result<Segmentation, SpectralError> {
    segment(mesh, &SegmentParams { delta, k, seed, ..SegmentParams::default() })
}

pub fn segment(mesh: &TriMesh, params: &SegmentParams) -> Result<Segmentation, SpectralError> {
    if let Some(0) = params.k {
        return Err(SpectralError::InvalidParameter("k must be at least 1".into()));
    }
    let n = mesh.triangle_count();
    if n < 2 {
        return Err(SpectralError::TooFewTriangles(n));
    }
    let graph = build_dual_graph(mesh, params.delta)?;
    let k_max = params.k_max.max(params.k.unwrap_or(1));
    let embedding = spectral_embed(&graph, k_max)?;
    let (k, method) = match params.k {
        Some(k) => (k.min(n), SegmentationMethod::ForcedK),
        None => (select_k(&embedding, k_max), SegmentationMethod::Auto),
    };
    let k = k.min(embedding.eigenvectors.len());
    let rows: Vec<Vec<f64>> = (0..n).map(|i| embedding.eigenvectors[..k].iter().map(|v| v[i]).collect()).collect();
    let raw = kmeans::kmeans(&rows, k, params.seed);
    let labels = repair_connectivity(mesh, raw);
    let count = labels.iter().max().map_or(0, |&m| m as usize + 1);
    Ok(Segmentation { labels, k: count, method, requested_k: k, eigenvalues: embedding.eigenvalues })
}

/// Triangle adjacency through shared edges (all pairs on non-manifold edges).
fn triangle_neighbors(mesh: &TriMesh) -> Vec<Vec<u32>> {
    let mut adj = vec![Vec::new(); mesh.triangle_count()];
    for g in mesh.edge_uses().chunk_by(|a, b| (a.lo, a.hi) == (b.lo, b.hi)) {
        for (i, x) in g.iter().enumerate() {
            for y in &g[i + 1..] {
                if x.triangle != y.triangle {
                    adj[x.triangle as usize].push(y.triangle);
                    adj[y.triangle as usize].push(x.triangle);
                }
            }
        }
    }
    adj
}

/// Islands: maximal edge-connected runs of one label. Returns island id per
/// triangle and, per island, (label, size, lowest triangle).
fn islands(adj: &[Vec<u32>], labels: &[u32]) -> (Vec<usize>, Vec<(u32, usize, usize)>) {
    let n = labels.len();
    let mut island = vec![usize::MAX; n];
    let mut info = Vec::new();
    for s in 0..n {
        if island[s] != usize::MAX {
            continue;
        }
        let id = info.len();
        let mut size = 0;
        let mut stack = vec![s];
        island[s] = id;
        while let Some(t) = stack.pop() {
            size += 1;
            for &u in &adj[t] {
                let u = u as usize;
                if island[u] == usize::MAX && labels[u] == labels[s] {
                    island[u] = id;
                    stack.push(u);
                }
            }
        }
        info.push((labels[s], size, s));
    }
    (island, info)
}

/// Makes every label's triangle set edge-connected. Islands smaller than
/// their label's largest island move to the label they share the most edges
/// with, repeated up to ten passes; anything still split afterwards (for
/// example a whole mesh component) becomes a label of its own. Labels are
/// then renumbered by first appearance.
fn repair_connectivity(mesh: &TriMesh, mut labels: Vec<u32>) -> Vec<u32> {
    let adj = triangle_neighbors(mesh);
    for _ in 0..REPAIR_PASSES {
        let (island, info) = islands(&adj, &labels);
        let mut keeper: std::collections::BTreeMap<u32, usize> = Default::default();
        for (id, &(label, size, _)) in info.iter().enumerate() {
            let e = keeper.entry(label).or_insert(id);
            if size > info[*e].1 {
                *e = id;
            }
        }
        let mut changed = false;
        let mut next = labels.clone();
        for (id, &(label, _, _)) in info.iter().enumerate() {
            if keeper[&label] == id {
                continue;
            }
            let mut votes: std::collections::BTreeMap<u32, usize> = Default::default();
            for t in (0..labels.len()).filter(|&t| island[t] == id) {
                for &u in &adj[t] {
                    let lu = labels[u as usize];
                    if lu != label {
                        *votes.entry(lu).or_default() += 1;
                    }
                }
            }
            // BTreeMap iteration makes ties go to the smallest label.
            if let Some((&to, _)) = votes.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))) {
                for t in (0..labels.len()).filter(|&t| island[t] == id) {
                    next[t] = to;
                }
                changed = true;
            }
        }
        labels = next;
        if !changed {
            break;
        }
    }
    // Every island is now its own final label.
    let (island, info) = islands(&adj, &labels);
    let mut keeper: std::collections::BTreeMap<u32, usize> = Default::default();
    for (id, &(label, size, _)) in info.iter().enumerate() {
        let e = keeper.entry(label).or_insert(id);
        if size > info[*e].1 {
            *e = id;
        }
    }
    let mut fresh = labels.iter().max().map_or(0, |&m| m + 1);
    let mut relabel = vec![0u32; info.len()];
    for (id, &(label, _, _)) in info.iter().enumerate() {
        relabel[id] = if keeper[&label] == id {
            label
        } else {
            fresh += 1;
            fresh - 1
        };
    }
    let merged: Vec<u32> = island.iter().map(|&i| relabel[i]).collect();
    canonical_labels(&merged)
}

/// Renumbers labels in order of first appearance.
pub fn canonical_labels(labels: &[u32]) -> Vec<u32> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len() as u32;
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

/// One segment per label, in label order.
pub fn segments_from_labels(mesh: &TriMesh, seg: &Segmentation) -> SegmentSet {
    let mut groups: Vec<Vec<u32>> = vec![Vec::new(); seg.k];
    for (t, &l) in seg.labels.iter().enumerate() {
        groups[l as usize].push(t as u32);
    }
    SegmentSet {
        provenance: Provenance::Automatic,
        parts: groups
            .iter()
            .enumerate()
            .filter(|(_, g)| !g.is_empty())
            .map(|(i, g)| SegmentPart { label: SegmentLabel::Auto(i as u32), mesh: mesh.submesh(g), cap_loops: 0 })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;
    use nalgebra::Vector3;

    fn embedding(vals: &[f64]) -> SpectralEmbedding {
        SpectralEmbedding { eigenvalues: vals.to_vec(), eigenvectors: Vec::new() }
    }

    #[test]
    fn flat_grid_has_only_geodesic_terms() {
        let g = build_dual_graph(&shapes::grid_plane(4, 1.0), 0.5).unwrap();
        let mean_geo = g.edges().iter().map(|e| e.geo).sum::<f64>() / g.edges().len() as f64;
        for e in g.edges() {
            assert_eq!(e.ang, 0.0);
            assert!((e.weight - 0.5 * e.geo / mean_geo).abs() < 1e-12);
        }
    }

    #[test]
    fn right_angle_fold_has_unit_angular_term() {
        let g = build_dual_graph(&shapes::folded_pair(std::f64::consts::FRAC_PI_2), 0.5).unwrap();
        assert_eq!(g.edges().len(), 1);
        assert!((g.edges()[0].ang - 1.0).abs() < 1e-12);
    }

    #[test]
    fn convex_fold_is_down_weighted() {
        // Opening angle 3π/2 folds the other way.
        let g = build_dual_graph(&shapes::folded_pair(1.5 * std::f64::consts::PI), 0.5).unwrap();
        assert!((g.edges()[0].ang - 0.2).abs() < 1e-12);
    }

    #[test]
    fn edge_count_is_interior_edge_count() {
        let m = shapes::torus(0.3, 0.1, 12, 6);
        let g = build_dual_graph(&m, 0.5).unwrap();
        assert_eq!(g.edges().len(), m.interior_edges().len());
        assert_eq!(g.edges().len(), m.triangle_count() * 3 / 2);
    }

    #[test]
    fn single_triangle_rejected() {
        let m = shapes::unit_cube().submesh(&[0]);
        assert_eq!(build_dual_graph(&m, 0.5).unwrap_err(), SpectralError::TooFewTriangles(1));
    }

    #[test]
    fn complete_graph_k4() {
        let mut edges = Vec::new();
        for i in 0..4 {
            for j in i + 1..4 {
                edges.push((i, j, 1.0));
            }
        }
        let emb = spectral_embed(&DualGraph::from_affinity(4, edges), 3).unwrap();
        let expected = [0.0, 4.0 / 3.0, 4.0 / 3.0, 4.0 / 3.0];
        for (a, b) in emb.eigenvalues.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn path_of_three() {
        // Normalized Laplacian of P3 has eigenvalues 0, 1, 2.
        let g = DualGraph::from_affinity(3, vec![(0, 1, 1.0), (1, 2, 1.0)]);
        let emb = spectral_embed(&g, 2).unwrap();
        for (a, b) in emb.eigenvalues.iter().zip([0.0, 1.0, 2.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn select_k_examples() {
        assert_eq!(select_k(&embedding(&[0.0, 0.01, 0.02, 0.9, 0.95]), 4), 3);
        assert_eq!(select_k(&embedding(&[0.0, 0.0, 0.5, 0.6, 0.65]), 4), 2);
        assert_eq!(select_k(&embedding(&[0.0, 0.9, 0.95]), 2), 1);
    }

    #[test]
    fn tetrahedron_forced_single_segment() {
        let s = segment_auto(&shapes::tetrahedron(), 0.5, Some(1), 42).unwrap();
        assert_eq!(s.labels, vec![0; 4]);
        assert_eq!(s.k, 1);
    }

    #[test]
    fn repair_merges_small_islands() {
        // A strip of 12 triangles labeled 0 except one stray triangle.
        let m = shapes::grid_plane(3, 1.0);
        let mut labels = vec![0u32; m.triangle_count()];
        labels[5] = 1;
        labels[17] = 1;
        let fixed = repair_connectivity(&m, labels);
        let (_, info) = islands(&triangle_neighbors(&m), &fixed);
        let mut seen = std::collections::HashSet::new();
        assert!(info.iter().all(|(l, _, _)| seen.insert(*l)));
    }

    #[test]
    fn two_spheres_never_share_a_label() {
        let a = shapes::icosphere(0.1, 2);
        let b = a.translated(Vector3::new(0.5, 0.0, 0.0));
        let m = TriMesh::merge(&[&a, &b]);
        let s = segment_auto(&m, 0.5, None, 42).unwrap();
        let half = a.triangle_count();
        for l in &s.labels[..half] {
            assert!(!s.labels[half..].contains(l));
        }
        assert!(s.eigenvalues[1] < ZERO_EIGENVALUE);
        assert_eq!(s.k, 2);
    }
}
