use std::collections::BTreeSet;
use std::time::Instant;

use idi_core::mesh::{shapes, TriMesh};
use idi_core::spectral::{
    build_dual_graph, canonical_labels, segment, select_k, spectral_embed, DualGraph, Laplacian, SegmentParams,
    SegmentationMethod, ZERO_EIGENVALUE,
};
use nalgebra::{DMatrix, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Eigenvalues of the normalized Laplacian, computed independently with
/// nalgebra's dense symmetric solver.
fn oracle_eigenvalues(graph: &DualGraph) -> Vec<f64> {
    let n = graph.node_count();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for e in graph.edges() {
        a[(e.a as usize, e.b as usize)] += e.affinity;
        a[(e.b as usize, e.a as usize)] += e.affinity;
    }
    let deg: Vec<f64> = (0..n).map(|i| a.row(i).sum()).collect();
    let mut l = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            if deg[i] > 0.0 && deg[j] > 0.0 {
                l[(i, j)] -= a[(i, j)] / (deg[i] * deg[j]).sqrt();
            }
        }
    }
    let mut ev: Vec<f64> = l.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Union of `parts` random connected graphs with random positive affinities.
fn random_multi_component(rng: &mut ChaCha8Rng, parts: usize) -> DualGraph {
    let mut edges = Vec::new();
    let mut offset = 0u32;
    for _ in 0..parts {
        let size = rng.random_range(3..12u32);
        // Spanning path keeps the part connected, extra chords add structure.
        for i in 1..size {
            edges.push((offset + i - 1, offset + i, rng.random_range(0.1..1.0)));
        }
        for _ in 0..size {
            let (i, j) = (rng.random_range(0..size), rng.random_range(0..size));
            if i + 1 < j {
                edges.push((offset + i, offset + j, rng.random_range(0.1..1.0)));
            }
        }
        offset += size;
    }
    DualGraph::from_affinity(offset as usize, edges)
}

#[test]
fn zero_multiplicity_matches_components_on_random_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..10 {
        let parts = rng.random_range(1..5usize);
        let graph = random_multi_component(&mut rng, parts);
        assert_eq!(graph.component_count(), parts);
        let n = graph.node_count();
        let emb = spectral_embed(&graph, n - 1).unwrap();
        let oracle = oracle_eigenvalues(&graph);
        assert_eq!(emb.eigenvalues.len(), n);
        for (got, want) in emb.eigenvalues.iter().zip(&oracle) {
            assert!((got - want.clamp(0.0, 2.0)).abs() <= 1e-9, "case {case}: {got} vs {want}");
        }
        assert_eq!(emb.zero_multiplicity(), parts, "case {case}");
        assert!(select_k(&emb, 10.min(n - 1)) >= parts);
    }
}

#[test]
fn eigenpair_residuals_are_small() {
    let mesh = shapes::dumbbell(0.05, 0.1, 0.02, 16, 8, 6);
    let graph = build_dual_graph(&mesh, 0.5).unwrap();
    let emb = spectral_embed(&graph, 10).unwrap();
    let lap = Laplacian::new(&graph);
    for (l, v) in emb.eigenvalues.iter().zip(&emb.eigenvectors) {
        assert!(lap.residual(*l, v) <= 1e-6);
        assert!((0.0..=2.0).contains(l));
    }
}

#[test]
fn disjoint_spheres_never_merge() {
    let a = shapes::icosphere(0.1, 2);
    let b = a.translated(Vector3::new(0.5, 0.0, 0.0));
    let both = TriMesh::merge(&[&a, &b]);
    let (component, _) = both.triangle_components();
    let seg = segment(&both, &SegmentParams::default()).unwrap();
    assert_eq!(seg.k, 2);
    for label in 0..seg.k as u32 {
        let comps: BTreeSet<u32> =
            (0..both.triangle_count()).filter(|&t| seg.labels[t] == label).map(|t| component[t]).collect();
        assert_eq!(comps.len(), 1, "label {label} spans {comps:?}");
    }
}

/// Run-length encoding of canonical labels in triangle order.
fn rle(labels: &[u32]) -> String {
    let mut out = Vec::new();
    let mut i = 0;
    while i < labels.len() {
        let j = labels[i..].iter().position(|&l| l != labels[i]).map_or(labels.len(), |p| i + p);
        out.push(format!("{}x{}", labels[i], j - i));
        i = j;
    }
    out.join(",")
}

#[test]
fn dumbbell_auto_and_golden_partition() {
    let mesh = shapes::dumbbell(0.05, 0.1, 0.02, 16, 8, 6);
    let auto = segment(&mesh, &SegmentParams::default()).unwrap();
    assert!(matches!(auto.k, 2 | 3), "auto k = {}", auto.k);
    assert_eq!(auto.k, 3);
    assert_eq!(auto.method, SegmentationMethod::Auto);

    let forced = segment(&mesh, &SegmentParams { k: Some(3), ..SegmentParams::default() }).unwrap();
    assert_eq!(forced.method, SegmentationMethod::ForcedK);
    // Frozen from the first run: bulb, neck, bulb in revolve order.
    assert_eq!(rle(&canonical_labels(&forced.labels)), "0x240,1x192,2x240");
    // The neck label is the one whose triangles all sit between the creases.
    let labels = canonical_labels(&forced.labels);
    let neck: Vec<usize> = (0..mesh.triangle_count()).filter(|&t| labels[t] == 1).collect();
    assert!(neck.iter().all(|&t| mesh.centroid(t).y.abs() < 0.05));
}

#[test]
fn neck_edges_carry_above_mean_weights() {
    let mesh = shapes::dumbbell(0.05, 0.1, 0.02, 16, 8, 6);
    let graph = build_dual_graph(&mesh, 0.5).unwrap();
    let mean = graph.edges().iter().map(|e| e.weight).sum::<f64>() / graph.edges().len() as f64;
    // Edges straddling the crease rings where the neck meets a bulb.
    let crease: Vec<f64> = graph
        .edges()
        .iter()
        .filter(|e| {
            let (ya, yb) = (mesh.centroid(e.a as usize).y.abs(), mesh.centroid(e.b as usize).y.abs());
            ya.min(yb) < 0.0530 && ya.max(yb) > 0.0530
        })
        .map(|e| e.weight)
        .collect();
    assert!(!crease.is_empty());
    assert!(crease.iter().all(|&w| w > mean), "crease weights {crease:?} vs mean {mean}");
}

#[test]
fn segmentation_is_deterministic() {
    let mesh = shapes::dumbbell(0.05, 0.1, 0.02, 16, 8, 6);
    let p = SegmentParams { seed: 9, ..SegmentParams::default() };
    assert_eq!(segment(&mesh, &p).unwrap(), segment(&mesh, &p).unwrap());
}

#[test]
fn twenty_thousand_faces_under_ten_seconds() {
    let mesh = shapes::dumbbell(0.05, 0.1, 0.02, 80, 50, 26);
    assert_eq!(mesh.triangle_count(), 20_000);
    let start = Instant::now();
    let seg = segment(&mesh, &SegmentParams::default()).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "segmentation took {elapsed:.2} s");
    assert!(seg.k >= 2);
    assert!(seg.eigenvalues.iter().take(seg.k).all(|&l| l < 1.0));
    assert!(seg.eigenvalues[0] < ZERO_EIGENVALUE);
}
