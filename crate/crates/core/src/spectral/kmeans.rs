//! Lloyd's k-means with k-means++ seeding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MAX_ITERATIONS: usize = 100;
pub const TOLERANCE: f64 = 1e-8;

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Clusters `rows` (all the same dimension) into at most `k` groups.
/// Ties go to the lowest center index; an emptied cluster keeps its center.
pub fn kmeans(rows: &[Vec<f64>], k: usize, seed: u64) -> Vec<u32> {
    let n = rows.len();
    if n == 0 || k == 0 {
        return vec![0; n];
    }
    let k = k.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<Vec<f64>> = vec![rows[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = rows.iter().map(|r| dist2(r, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && *d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(rows[pick].clone());
        let c = centers.last().unwrap();
        for (d, r) in d2.iter_mut().zip(rows) {
            *d = d.min(dist2(r, c));
        }
    }

    let dim = rows[0].len();
    let mut labels = vec![0u32; n];
    for _ in 0..MAX_ITERATIONS {
        for (l, r) in labels.iter_mut().zip(rows) {
            let mut best = (f64::INFINITY, 0usize);
            for (j, c) in centers.iter().enumerate() {
                let d = dist2(r, c);
                if d < best.0 {
                    best = (d, j);
                }
            }
            *l = best.1 as u32;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (l, r) in labels.iter().zip(rows) {
            counts[*l as usize] += 1;
            sums[*l as usize].iter_mut().zip(r).for_each(|(s, x)| *s += x);
        }
        let mut shift = 0.0f64;
        for j in 0..k {
            if counts[j] == 0 {
                continue;
            }
            let new: Vec<f64> = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            shift = shift.max(dist2(&new, &centers[j]).sqrt());
            centers[j] = new;
        }
        if shift <= TOLERANCE {
            break;
        }
    }
    labels
}
