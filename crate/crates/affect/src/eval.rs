//! Partition agreement and tracking-error metrics.

use std::collections::HashMap;

use ndarray::Array2;

use crate::assignment::ClusterAssignment;
use crate::error::{Error, Result};

fn pair_count(x: f64) -> f64 {
    x * (x - 1.0) / 2.0
}

/// Rand index between two clusterings of the same objects: the fraction of
/// object pairs the partitions agree on, counting pairs together in both and
/// pairs apart in both. Computed from the contingency table, so it costs
/// O(n + k_a * k_b) rather than O(n^2).
pub fn rand_index(a: &ClusterAssignment, b: &ClusterAssignment) -> Result<f64> {
    if a.ids() != b.ids() {
        return Err(Error::IdMismatch(
            "rand index needs identical object lists".into(),
        ));
    }
    let n = a.n();
    if n < 2 {
        return Err(Error::BadConfig(
            "rand index needs at least two objects".into(),
        ));
    }
    let mut joint = vec![vec![0.0f64; b.k()]; a.k()];
    let mut row_totals = vec![0.0f64; a.k()];
    let mut col_totals = vec![0.0f64; b.k()];
    for i in 0..n {
        let (la, lb) = (a.label_of(i), b.label_of(i));
        joint[la][lb] += 1.0;
        row_totals[la] += 1.0;
        col_totals[lb] += 1.0;
    }
    let total_pairs = pair_count(n as f64);
    let together_both: f64 = joint.iter().flatten().map(|&c| pair_count(c)).sum();
    let together_a: f64 = row_totals.iter().map(|&c| pair_count(c)).sum();
    let together_b: f64 = col_totals.iter().map(|&c| pair_count(c)).sum();
    Ok((total_pairs + 2.0 * together_both - together_a - together_b) / total_pairs)
}

/// Mean squared entrywise error between two matrices of equal shape.
pub fn mse(estimate: &Array2<f64>, truth: &Array2<f64>) -> Result<f64> {
    if estimate.dim() != truth.dim() {
        return Err(Error::DimensionMismatch {
            rows: estimate.nrows(),
            cols: estimate.ncols(),
            expected: truth.nrows(),
        });
    }
    let count = estimate.len().max(1) as f64;
    let sum: f64 = estimate
        .iter()
        .zip(truth.iter())
        .map(|(e, t)| (e - t) * (e - t))
        .sum();
    Ok(sum / count)
}

/// Maximum-weight perfect matching on a square score matrix via shortest
/// augmenting paths with potentials, O(n^3). Returns the column assigned to
/// each row.
pub fn hungarian(score: &Array2<f64>) -> Result<Vec<usize>> {
    let n = score.nrows();
    if score.ncols() != n {
        return Err(Error::NonSquare);
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    // The classic formulation minimizes cost, so run it on negated scores.
    // Indices are 1-based with 0 as the virtual start column.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut row_for_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_for_col[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_for_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = -score[[i0 - 1, j - 1]] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_for_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_for_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_for_col[j0] = row_for_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut result = vec![0usize; n];
    for j in 1..=n {
        result[row_for_col[j] - 1] = j - 1;
    }
    Ok(result)
}

/// Relabels `current` so each of its clusters takes the label of the
/// `previous` cluster it overlaps most, using a maximum-overlap matching
/// over the shared object ids. Current clusters matched only to padding
/// get fresh labels starting at `previous.k()`, so stable and fresh labels
/// never collide. The result is the same partition as `current` with
/// renamed clusters.
pub fn match_clusters(
    previous: &ClusterAssignment,
    current: &ClusterAssignment,
) -> Result<ClusterAssignment> {
    let size = previous.k().max(current.k());
    let mut overlap = Array2::zeros((size, size));
    let previous_label: HashMap<&str, usize> = previous
        .ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), previous.label_of(i)))
        .collect();
    for (i, id) in current.ids().iter().enumerate() {
        if let Some(&p) = previous_label.get(id.as_str()) {
            overlap[[current.label_of(i), p]] += 1.0;
        }
    }
    let assigned = hungarian(&overlap)?;
    let mut map = vec![0usize; current.k()];
    let mut fresh = previous.k();
    for (c, slot) in map.iter_mut().enumerate() {
        if assigned[c] < previous.k() {
            *slot = assigned[c];
        } else {
            *slot = fresh;
            fresh += 1;
        }
    }
    Ok(current.relabeled(&map))
}
