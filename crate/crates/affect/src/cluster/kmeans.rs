//! k-means expressed through a similarity matrix.
//!
//! When `W = X X^T` is the Gram matrix of some feature rows, the squared
//! distance from object `i` to the mean of cluster `c` unfolds as
//!
//! ```text
//! ||x_i - m_c||^2 = w_ii - 2/|c| * sum_{j in c} w_ij
//!                        + 1/|c|^2 * sum_{j,l in c} w_jl
//! ```
//!
//! so Lloyd's iteration never needs the features themselves. The smoothed
//! matrices produced by tracking are Gram-like but not exactly Gram, so the
//! input is only required to have no eigenvalue below `-1e-6 ||W||_F`.
//!
//! [`kmeans_features`] is the same iteration run on explicit feature rows,
//! with identical initialization, tie-breaking and empty-cluster repair;
//! given the same init the two routes produce the same assignments. It also
//! serves as the inner clusterer for spectral embeddings.

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::assignment::ClusterAssignment;
use crate::error::{Error, Result};
use crate::linalg::check_psd;
use crate::proximity::{ProximityKind, ProximityMatrix};

const MAX_ITERATIONS: usize = 500;

/// Starting point for the iteration.
#[derive(Debug, Clone, Copy)]
pub enum KmeansInit<'a> {
    /// Start from an existing assignment (labels must be below k).
    Assignment(&'a ClusterAssignment),
    /// Draw a uniform random label in `0..k` per object from this seed.
    Seed(u64),
}

/// Converged clustering plus its objective value.
#[derive(Debug, Clone)]
pub struct KmeansResult {
    pub assignment: ClusterAssignment,
    /// Sum of squared distances to cluster means at convergence.
    pub cost: f64,
    pub iterations: usize,
    /// Objective value seen at each iteration; never increases.
    pub cost_trace: Vec<f64>,
}

fn initial_labels(init: &KmeansInit, ids: &[String], n: usize, k: usize) -> Result<Vec<usize>> {
    match init {
        KmeansInit::Assignment(a) => {
            if a.ids() != ids {
                return Err(Error::IdMismatch(
                    "k-means init covers different objects".into(),
                ));
            }
            if let Some(&l) = a.labels().iter().find(|&&l| l >= k) {
                return Err(Error::LabelOutOfRange { label: l, k });
            }
            Ok(a.labels().to_vec())
        }
        KmeansInit::Seed(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            Ok((0..n).map(|_| rng.random_range(0..k)).collect())
        }
    }
}

/// The Lloyd iteration shared by both routes. `distances` fills an n x k
/// buffer of squared distances to the current cluster means.
fn lloyd_loop(
    ids: &[String],
    n: usize,
    k: usize,
    mut labels: Vec<usize>,
    mut distances: impl FnMut(&[usize], &mut Array2<f64>),
) -> Result<KmeansResult> {
    let mut dist = Array2::zeros((n, k));
    let mut iterations = 0;
    let mut cost_trace = Vec::new();
    loop {
        iterations += 1;
        if iterations > MAX_ITERATIONS {
            return Err(Error::NoConvergence(MAX_ITERATIONS));
        }

        // Re-seed empty clusters one at a time with the object farthest
        // from its current mean, recomputing distances after each move.
        loop {
            let mut sizes = vec![0usize; k];
            for &l in &labels {
                sizes[l] += 1;
            }
            let Some(empty) = sizes.iter().position(|&s| s == 0) else {
                break;
            };
            distances(&labels, &mut dist);
            let mut farthest = 0;
            for i in 1..n {
                if dist[[i, labels[i]]] > dist[[farthest, labels[farthest]]] {
                    farthest = i;
                }
            }
            labels[farthest] = empty;
        }

        distances(&labels, &mut dist);
        let cost: f64 = (0..n).map(|i| dist[[i, labels[i]]]).sum();
        cost_trace.push(cost);
        let mut changed = false;
        let mut next = Vec::with_capacity(n);
        for i in 0..n {
            let mut best = 0;
            for c in 1..k {
                if dist[[i, c]] < dist[[i, best]] {
                    best = c;
                }
            }
            if best != labels[i] {
                changed = true;
            }
            next.push(best);
        }
        if !changed {
            let assignment = ClusterAssignment::new(ids.to_vec(), labels)?;
            return Ok(KmeansResult {
                assignment,
                cost,
                iterations,
                cost_trace,
            });
        }
        labels = next;
    }
}

/// k-means driven entirely by a similarity matrix.
pub fn kmeans_similarity(
    w: &ProximityMatrix,
    k: usize,
    init: KmeansInit,
) -> Result<KmeansResult> {
    if w.kind() != ProximityKind::Similarity {
        return Err(Error::WrongKind {
            expected: "similarity",
            got: w.kind().as_str(),
        });
    }
    let n = w.n();
    if k == 0 || k > n {
        return Err(Error::KOutOfRange { k, n });
    }
    check_psd(w.values())?;

    let labels = initial_labels(&init, w.ids(), n, k)?;
    let values = w.values();
    lloyd_loop(w.ids(), n, k, labels, |labels, dist| {
        // Per-cluster sums: s1[i][c] = sum of w_ij over j in c, and
        // s2[c] = sum of w_jl over j, l in c.
        let mut sizes = vec![0usize; k];
        for &l in labels {
            sizes[l] += 1;
        }
        let mut s1: Array2<f64> = Array2::zeros((n, k));
        for j in 0..n {
            let c = labels[j];
            for i in 0..n {
                s1[[i, c]] += values[[i, j]];
            }
        }
        let mut s2 = vec![0.0; k];
        for j in 0..n {
            s2[labels[j]] += s1[[j, labels[j]]];
        }
        for i in 0..n {
            for c in 0..k {
                if sizes[c] == 0 {
                    dist[[i, c]] = f64::INFINITY;
                } else {
                    let size = sizes[c] as f64;
                    dist[[i, c]] =
                        values[[i, i]] - 2.0 * s1[[i, c]] / size + s2[c] / (size * size);
                }
            }
        }
    })
}

/// Standard feature-space k-means over the rows of `x`, sharing all control
/// flow with [`kmeans_similarity`].
pub fn kmeans_features(
    x: &Array2<f64>,
    ids: &[String],
    k: usize,
    init: KmeansInit,
) -> Result<KmeansResult> {
    let n = x.nrows();
    if k == 0 || k > n {
        return Err(Error::KOutOfRange { k, n });
    }
    let p = x.ncols();
    let labels = initial_labels(&init, ids, n, k)?;
    lloyd_loop(ids, n, k, labels, |labels, dist| {
        let mut sizes = vec![0usize; k];
        for &l in labels {
            sizes[l] += 1;
        }
        let mut centroids: Array2<f64> = Array2::zeros((k, p));
        for i in 0..n {
            let c = labels[i];
            for d in 0..p {
                centroids[[c, d]] += x[[i, d]];
            }
        }
        for c in 0..k {
            if sizes[c] > 0 {
                for d in 0..p {
                    centroids[[c, d]] /= sizes[c] as f64;
                }
            }
        }
        for i in 0..n {
            for c in 0..k {
                if sizes[c] == 0 {
                    dist[[i, c]] = f64::INFINITY;
                } else {
                    let mut d2 = 0.0;
                    for d in 0..p {
                        let diff = x[[i, d]] - centroids[[c, d]];
                        d2 += diff * diff;
                    }
                    dist[[i, c]] = d2;
                }
            }
        }
    })
}
