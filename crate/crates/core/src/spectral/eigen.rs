//! Smallest eigenpairs of the normalized graph Laplacian.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DualGraph, SpectralError};

/// Graphs with at least this many nodes use the iterative solver.
pub const DENSE_LIMIT: usize = 5000;

const SHIFT: f64 = 1e-3;
const MAX_ITERATIONS: usize = 300;
const RESIDUAL_TOL: f64 = 1e-10;

/// Normalized Laplacian `I − D^{-1/2} A D^{-1/2}` in compressed row form.
/// Isolated nodes get a zero row, so each one counts as its own component.
#[derive(Debug, Clone)]
pub struct Laplacian {
    n: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Laplacian {
    pub fn new(graph: &DualGraph) -> Self {
        let n = graph.node_count();
        let mut degree = vec![0.0; n];
        for e in graph.edges() {
            degree[e.a as usize] += e.affinity;
            degree[e.b as usize] += e.affinity;
        }
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in rows.iter_mut().enumerate() {
            if degree[i] > 0.0 {
                row.push((i, 1.0));
            }
        }
        for e in graph.edges() {
            let (a, b) = (e.a as usize, e.b as usize);
            if e.affinity > 0.0 && a != b {
                let v = -e.affinity / (degree[a] * degree[b]).sqrt();
                rows[a].push((b, v));
                rows[b].push((a, v));
            }
        }
        let mut row_start = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_start.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            // Parallel edges are summed.
            for (c, v) in row {
                if cols.len() > *row_start.last().unwrap() && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_start.push(cols.len());
        }
        Self { n, row_start, cols, vals }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_start[i]..self.row_start[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            *yi = s;
        }
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::<f64>::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.row_start[i]..self.row_start[i + 1] {
                m[(i, self.cols[k])] = self.vals[k];
            }
        }
        m
    }

    /// ‖L v − λ v‖∞
    pub fn residual(&self, lambda: f64, v: &[f64]) -> f64 {
        let mut lv = vec![0.0; self.n];
        self.apply(v, &mut lv);
        lv.iter().zip(v).map(|(a, b)| (a - lambda * b).abs()).fold(0.0, f64::max)
    }
}

/// Returns the `count` smallest eigenpairs, eigenvalues ascending and
/// clamped to [0, 2], each eigenvector sign-normalized so its entry of
/// largest magnitude is positive.
pub fn smallest_eigenpairs(lap: &Laplacian, count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>), SpectralError> {
    let count = count.min(lap.size());
    let (vals, mut vecs) =
        if lap.size() < DENSE_LIMIT { dense(lap, count)? } else { shift_invert_subspace(lap, count)? };
    vecs.iter_mut().for_each(|v| fix_sign(v));
    Ok((vals.into_iter().map(|l| l.clamp(0.0, 2.0)).collect(), vecs))
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0.0f64;
    for &x in v.iter() {
        if x.abs() > best.abs() {
            best = x;
        }
    }
    if best < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn dense(lap: &Laplacian, count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>), SpectralError> {
    let m = lap.to_dense();
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| SpectralError::ConvergenceFailure(format!("dense eigensolver: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let vals = (0..count).map(|j| s[j]).collect();
    let vecs = (0..count).map(|j| (0..lap.size()).map(|i| u[(i, j)]).collect()).collect();
    Ok((vals, vecs))
}

/// Block inverse iteration on `(L + σI)` with a sparse Cholesky factor,
/// followed by Rayleigh–Ritz on the block each round. A block wider than the
/// requested count keeps degenerate and clustered eigenvalues converging.
fn shift_invert_subspace(lap: &Laplacian, count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>), SpectralError> {
    let n = lap.size();
    let p = (2 * count).max(count + 8).min(n);
    let mut triplets = Vec::with_capacity(lap.vals.len());
    for i in 0..n {
        let mut diag_seen = false;
        for k in lap.row_start[i]..lap.row_start[i + 1] {
            let c = lap.cols[k];
            let mut v = lap.vals[k];
            if c == i {
                v += SHIFT;
                diag_seen = true;
            }
            triplets.push(Triplet::new(i, c, v));
        }
        if !diag_seen {
            triplets.push(Triplet::new(i, i, SHIFT));
        }
    }
    let shifted = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| SpectralError::ConvergenceFailure(format!("matrix assembly: {e:?}")))?;
    let llt = shifted
        .sp_cholesky(Side::Lower)
        .map_err(|e| SpectralError::ConvergenceFailure(format!("sparse Cholesky: {e:?}")))?;

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut block: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| rng.random::<f64>() - 0.5).collect()).collect();
    orthonormalize(&mut block);

    let mut lq = vec![vec![0.0; n]; p];
    for _ in 0..MAX_ITERATIONS {
        let rhs = Mat::<f64>::from_fn(n, p, |i, j| block[j][i]);
        let y = llt.solve(&rhs);
        for (j, col) in block.iter_mut().enumerate() {
            for (i, x) in col.iter_mut().enumerate() {
                *x = y[(i, j)];
            }
        }
        orthonormalize(&mut block);

        for (q, out) in block.iter().zip(lq.iter_mut()) {
            lap.apply(q, out);
        }
        let h = Mat::<f64>::from_fn(p, p, |i, j| dot(&block[i], &lq[j]));
        let h = Mat::<f64>::from_fn(p, p, |i, j| 0.5 * (h[(i, j)] + h[(j, i)]));
        let evd = h
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| SpectralError::ConvergenceFailure(format!("Ritz eigensolver: {e:?}")))?;
        let theta = evd.S().column_vector();
        let w = evd.U();
        let ritz: Vec<Vec<f64>> = (0..p)
            .map(|j| {
                let mut v = vec![0.0; n];
                for (k, q) in block.iter().enumerate() {
                    let c = w[(k, j)];
                    v.iter_mut().zip(q).for_each(|(vi, qi)| *vi += c * qi);
                }
                v
            })
            .collect();
        let vals: Vec<f64> = (0..p).map(|j| theta[j]).collect();
        block = ritz;
        let converged = (0..count).all(|j| lap.residual(vals[j], &block[j]) <= RESIDUAL_TOL);
        if converged {
            block.truncate(count);
            return Ok((vals[..count].to_vec(), block));
        }
    }
    Err(SpectralError::ConvergenceFailure(format!(
        "subspace iteration did not reach residual {RESIDUAL_TOL:e} in {MAX_ITERATIONS} iterations"
    )))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Modified Gram–Schmidt, twice for stability. Columns that collapse are
/// replaced by a deterministic unit vector before re-orthogonalizing.
fn orthonormalize(cols: &mut [Vec<f64>]) {
    for _pass in 0..2 {
        for j in 0..cols.len() {
            let (done, rest) = cols.split_at_mut(j);
            let c = &mut rest[0];
            for q in done.iter() {
                let d = dot(q, c);
                c.iter_mut().zip(q).for_each(|(x, qi)| *x -= d * qi);
            }
            let mut norm = dot(c, c).sqrt();
            if norm < 1e-300 {
                c.iter_mut().enumerate().for_each(|(i, x)| *x = ((i * 7 + j * 13) % 17) as f64 - 8.0);
                for q in done.iter() {
                    let d = dot(q, c);
                    c.iter_mut().zip(q).for_each(|(x, qi)| *x -= d * qi);
                }
                norm = dot(c, c).sqrt();
            }
            c.iter_mut().for_each(|x| *x /= norm);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> DualGraph {
        DualGraph::from_affinity(n, (0..n - 1).map(|i| (i as u32, i as u32 + 1, 1.0)).collect())
    }

    #[test]
    fn iterative_matches_dense_on_path() {
        let g = path(400);
        let lap = Laplacian::new(&g);
        let (dv, _) = dense(&lap, 6).unwrap();
        let (iv, ivecs) = shift_invert_subspace(&lap, 6).unwrap();
        for j in 0..6 {
            assert!((dv[j] - iv[j]).abs() < 1e-9, "{j}: {} vs {}", dv[j], iv[j]);
            assert!(lap.residual(iv[j], &ivecs[j]) < 1e-9);
        }
    }

    #[test]
    fn iterative_handles_repeated_zero_eigenvalues() {
        // Three disjoint paths: a triple null space.
        let mut edges = Vec::new();
        for c in 0..3u32 {
            for i in 0..99u32 {
                edges.push((c * 100 + i, c * 100 + i + 1, 1.0));
            }
        }
        let lap = Laplacian::new(&DualGraph::from_affinity(300, edges));
        let (vals, _) = shift_invert_subspace(&lap, 4).unwrap();
        assert!(vals[..3].iter().all(|l| l.abs() < 1e-9));
        assert!(vals[3] > 1e-6);
    }
}
