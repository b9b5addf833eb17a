//! Tracks the true proximity matrix by shrinkage over time.
//!
//! The smoothed estimate follows
//!
//! ```text
//! psi_hat^t = alpha^t * psi_hat^{t-1} + (1 - alpha^t) * W^t,    psi_hat^0 = W^0
//! ```
//!
//! The forgetting factor that minimizes the expected squared tracking error
//! is the ratio of noise variance to noise variance plus squared drift,
//!
//! ```text
//! alpha^t = sum_ij var(n^t_ij) / sum_ij [ (psi_hat^{t-1}_ij - psi^t_ij)^2 + var(n^t_ij) ]
//! ```
//!
//! Neither the true matrix `psi^t` nor the noise variances are observable,
//! so both are estimated by block sample moments of `W^t` under the current
//! clustering: objects in the same cluster are treated as replicates of one
//! another, giving one mean and one variance per within-cluster off-diagonal
//! block, per within-cluster diagonal and per between-cluster block.
//! [`affect_step`] closes the loop: cluster, estimate moments, re-estimate
//! alpha, re-smooth, re-cluster, for a fixed number of refinement passes.

use ndarray::Array2;

use crate::assignment::ClusterAssignment;
use crate::cluster::StaticClusterer;
use crate::error::{Error, Result};
use crate::proximity::{align_state, Alignment, ProximityMatrix};
use crate::util::derive_seed;

/// Smoothed proximity estimate plus the history of applied forgetting
/// factors. `t` counts observed steps starting at zero.
#[derive(Debug, Clone)]
pub struct SmoothedState {
    pub psi_hat: ProximityMatrix,
    pub alpha_history: Vec<f64>,
    pub t: usize,
}

/// Sample moments of a proximity matrix organized by cluster blocks.
///
/// `between_mean[[c, c]]` mirrors `within_mean[c]` so the between tables are
/// total over cluster pairs; the diagonal entries of the matrix itself form
/// their own family (`diag_mean`, `diag_var`).
#[derive(Debug, Clone)]
pub struct BlockMoments {
    pub within_mean: Vec<f64>,
    pub within_var: Vec<f64>,
    pub diag_mean: Vec<f64>,
    pub diag_var: Vec<f64>,
    pub between_mean: Array2<f64>,
    pub between_var: Array2<f64>,
}

impl BlockMoments {
    pub fn k(&self) -> usize {
        self.within_mean.len()
    }

    /// Replicates the block moments back onto the full matrix layout,
    /// returning per-entry expected values and variances.
    pub fn expand(&self, clusters: &ClusterAssignment) -> (Array2<f64>, Array2<f64>) {
        let n = clusters.n();
        let labels = clusters.labels();
        let mut expected = Array2::zeros((n, n));
        let mut variance = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let (c, d) = (labels[i], labels[j]);
                if i == j {
                    expected[[i, j]] = self.diag_mean[c];
                    variance[[i, j]] = self.diag_var[c];
                } else if c == d {
                    expected[[i, j]] = self.within_mean[c];
                    variance[[i, j]] = self.within_var[c];
                } else {
                    expected[[i, j]] = self.between_mean[[c, d]];
                    variance[[i, j]] = self.between_var[[c, d]];
                }
            }
        }
        (expected, variance)
    }
}

/// One forgetting-factor estimate. `numerator` and `denominator` are the
/// two sums whose ratio gives `alpha`; `iterations_run` records which
/// refinement pass produced it.
#[derive(Debug, Clone, Copy)]
pub struct ForgettingEstimate {
    pub alpha: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub iterations_run: usize,
}

/// One shrinkage update of the smoothed matrix.
pub fn smooth_update(
    prev: &ProximityMatrix,
    current: &ProximityMatrix,
    alpha: f64,
) -> Result<ProximityMatrix> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    if prev.kind() != current.kind() {
        return Err(Error::KindMismatch {
            previous: prev.kind().as_str(),
            current: current.kind().as_str(),
        });
    }
    if prev.ids() != current.ids() {
        return Err(Error::IdMismatch(
            "smooth_update requires identical id sequences".into(),
        ));
    }
    let values = alpha * prev.values() + (1.0 - alpha) * current.values();
    Ok(ProximityMatrix::from_valid_parts(
        current.kind(),
        values,
        current.ids().to_vec(),
    ))
}

/// Weights that the smoothing recursion implicitly places on each past
/// observation: with history `[alpha^1, ..., alpha^t]`,
///
/// ```text
/// psi_hat^t = sum_{s=0}^{t} beta^s W^s
/// beta^t = 1 - alpha^t
/// beta^s = (1 - alpha^s) * prod_{r=s+1}^{t} alpha^r      (0 < s < t)
/// beta^0 = prod_{r=1}^{t} alpha^r
/// ```
///
/// The weights always sum to one. An empty history gives `[1.0]`.
pub fn expanded_weights(alpha_history: &[f64]) -> Result<Vec<f64>> {
    for &a in alpha_history {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::AlphaOutOfRange(a));
        }
    }
    let t = alpha_history.len();
    let mut weights = vec![0.0; t + 1];
    // suffix[s] = prod of alpha_history[s..]; built right to left.
    let mut suffix = 1.0;
    weights[t] = if t == 0 { 1.0 } else { 1.0 - alpha_history[t - 1] };
    for s in (1..t).rev() {
        suffix *= alpha_history[s];
        weights[s] = (1.0 - alpha_history[s - 1]) * suffix;
    }
    if t > 0 {
        suffix *= alpha_history[0];
        weights[0] = suffix;
    }
    Ok(weights)
}

struct BlockStats {
    mean: f64,
    var: f64,
}

/// Mean and unbiased variance of a multiset of entries, with the degenerate
/// rules: an empty block falls back to the supplied mean with zero variance,
/// a single-entry block reports that entry with zero variance.
fn block_stats(entries: &[f64], fallback_mean: f64) -> BlockStats {
    match entries.len() {
        0 => BlockStats {
            mean: fallback_mean,
            var: 0.0,
        },
        1 => BlockStats {
            mean: entries[0],
            var: 0.0,
        },
        n => {
            let mean = entries.iter().sum::<f64>() / n as f64;
            let var = entries.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
                / (n as f64 - 1.0);
            BlockStats { mean, var }
        }
    }
}

/// Block sample moments of `w` under `clusters`.
///
/// Each distinct proximity is sampled once: within-cluster off-diagonal
/// blocks over unordered member pairs, between blocks over cross pairs, and
/// the diagonal of each cluster separately. Empty blocks fall back to the
/// global off-diagonal (or diagonal) mean with zero variance, so restricted
/// assignments with empty clusters are acceptable input.
pub fn estimate_block_moments(
    w: &ProximityMatrix,
    clusters: &ClusterAssignment,
) -> Result<BlockMoments> {
    if w.ids() != clusters.ids() {
        return Err(Error::IdMismatch(
            "moments need the clustering of the same objects".into(),
        ));
    }
    let n = w.n();
    let k = clusters.k();
    let values = w.values();
    let members: Vec<Vec<usize>> = (0..k).map(|c| clusters.members(c)).collect();

    let mut offdiag_sum = 0.0;
    let mut offdiag_count = 0usize;
    let mut diag_sum = 0.0;
    for i in 0..n {
        diag_sum += values[[i, i]];
        for j in (i + 1)..n {
            offdiag_sum += values[[i, j]];
            offdiag_count += 1;
        }
    }
    let global_offdiag = if offdiag_count > 0 {
        offdiag_sum / offdiag_count as f64
    } else {
        0.0
    };
    let global_diag = if n > 0 { diag_sum / n as f64 } else { 0.0 };

    let mut within_mean = vec![0.0; k];
    let mut within_var = vec![0.0; k];
    let mut diag_mean = vec![0.0; k];
    let mut diag_var = vec![0.0; k];
    let mut between_mean = Array2::zeros((k, k));
    let mut between_var = Array2::zeros((k, k));

    for c in 0..k {
        let m = &members[c];
        let mut within = Vec::with_capacity(m.len() * m.len().saturating_sub(1) / 2);
        for (a, &i) in m.iter().enumerate() {
            for &j in &m[(a + 1)..] {
                within.push(values[[i, j]]);
            }
        }
        let stats = block_stats(&within, global_offdiag);
        within_mean[c] = stats.mean;
        within_var[c] = stats.var;

        let diag: Vec<f64> = m.iter().map(|&i| values[[i, i]]).collect();
        let stats = block_stats(&diag, global_diag);
        diag_mean[c] = stats.mean;
        diag_var[c] = stats.var;

        between_mean[[c, c]] = within_mean[c];
        between_var[[c, c]] = within_var[c];
    }

    for c in 0..k {
        for d in (c + 1)..k {
            let mut cross = Vec::with_capacity(members[c].len() * members[d].len());
            for &i in &members[c] {
                for &j in &members[d] {
                    cross.push(values[[i, j]]);
                }
            }
            let stats = block_stats(&cross, global_offdiag);
            between_mean[[c, d]] = stats.mean;
            between_mean[[d, c]] = stats.mean;
            between_var[[c, d]] = stats.var;
            between_var[[d, c]] = stats.var;
        }
    }

    Ok(BlockMoments {
        within_mean,
        within_var,
        diag_mean,
        diag_var,
        between_mean,
        between_var,
    })
}

/// Plug-in estimate of the forgetting factor.
///
/// The block moments stand in for the unobservable true matrix and noise
/// variances; both sums run over all `n^2` entries after replicating the
/// moments onto the matrix layout. A zero denominator (noise-free,
/// drift-free data) yields `alpha = 0`, and the ratio is clamped to
/// `[0, 1]`.
pub fn estimate_alpha(
    prev_smoothed: &ProximityMatrix,
    moments: &BlockMoments,
    clusters: &ClusterAssignment,
) -> Result<ForgettingEstimate> {
    if prev_smoothed.ids() != clusters.ids() {
        return Err(Error::IdMismatch(
            "previous smoothed matrix and clustering cover different objects".into(),
        ));
    }
    if moments.k() != clusters.k() {
        return Err(Error::IdMismatch(format!(
            "moments cover {} clusters, assignment declares {}",
            moments.k(),
            clusters.k()
        )));
    }
    let (expected, variance) = moments.expand(clusters);
    let prev = prev_smoothed.values();
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    let n = clusters.n();
    for i in 0..n {
        for j in 0..n {
            let v = variance[[i, j]];
            let bias = prev[[i, j]] - expected[[i, j]];
            numerator += v;
            denominator += bias * bias + v;
        }
    }
    let alpha = if denominator == 0.0 {
        0.0
    } else {
        (numerator / denominator).clamp(0.0, 1.0)
    };
    Ok(ForgettingEstimate {
        alpha,
        numerator,
        denominator,
        iterations_run: 0,
    })
}

/// Result of one tracked time step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: SmoothedState,
    pub assignment: ClusterAssignment,
    /// One estimate per refinement pass; the last one was applied. Empty at
    /// the first time step, which has nothing to smooth against.
    pub estimates: Vec<ForgettingEstimate>,
}

/// How the refinement loop obtains its starting assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitPolicy {
    /// Start from the previous step's assignment when it covers the current
    /// objects; fall back to static clustering otherwise.
    Previous,
    /// Always start from a static clustering of the current observation.
    Static,
}

/// Advances the tracker by one observed proximity matrix.
///
/// With no prior state the observation is adopted as the smoothed estimate
/// and clustered directly. Otherwise the previous estimate is aligned to the
/// current object set, and `iterations` refinement passes run: estimate
/// block moments of `W^t` under the working assignment (restricted to the
/// shared objects), estimate alpha, re-smooth, re-cluster the result.
/// Objects new at this step take their raw observed proximities and take
/// part in clustering but not in the alpha estimate. A previous assignment
/// that does not cover the current ids, or whose cluster count conflicts
/// with a fixed-k clusterer, is replaced by a static clustering of `W^t`.
///
/// Fails with [`Error::EmptyIntersection`] when no object survives from the
/// previous step; callers should then restart tracking from this
/// observation alone.
pub fn affect_step(
    state: Option<&SmoothedState>,
    current: &ProximityMatrix,
    clusterer: &dyn StaticClusterer,
    init: Option<&ClusterAssignment>,
    init_policy: InitPolicy,
    iterations: usize,
    seed: u64,
) -> Result<StepOutcome> {
    if iterations == 0 {
        return Err(Error::BadConfig(
            "affect_step needs at least one refinement pass".into(),
        ));
    }
    let prev = match state {
        None => {
            let assignment = clusterer.cluster(current, init, derive_seed(seed, 0))?;
            return Ok(StepOutcome {
                state: SmoothedState {
                    psi_hat: current.clone(),
                    alpha_history: Vec::new(),
                    t: 0,
                },
                assignment,
                estimates: Vec::new(),
            });
        }
        Some(prev) => prev,
    };

    let alignment = align_state(&prev.psi_hat, current)?;
    let w_shared = current.restrict(&alignment.shared_indices);

    let usable_init = match (init_policy, init) {
        (InitPolicy::Previous, Some(a)) if init_covers(a, current, clusterer) => Some(a),
        _ => None,
    };
    let mut assignment = match usable_init {
        Some(a) => a.clone(),
        None => clusterer.cluster(current, None, derive_seed(seed, 0))?,
    };

    let mut estimates = Vec::with_capacity(iterations);
    let mut psi_full = current.clone();
    for pass in 1..=iterations {
        let shared_assignment = assignment.restrict(&alignment.shared_indices);
        let moments = estimate_block_moments(&w_shared, &shared_assignment)?;
        let mut est = estimate_alpha(&alignment.prev_restricted, &moments, &shared_assignment)?;
        est.iterations_run = pass;
        let psi_core = smooth_update(&alignment.prev_restricted, &w_shared, est.alpha)?;
        psi_full = merge_with_new(&psi_core, current, &alignment);
        assignment = clusterer.cluster(&psi_full, Some(&assignment), derive_seed(seed, pass as u64))?;
        estimates.push(est);
    }

    let alpha = estimates.last().expect("at least one pass").alpha;
    let mut alpha_history = prev.alpha_history.clone();
    alpha_history.push(alpha);
    Ok(StepOutcome {
        state: SmoothedState {
            psi_hat: psi_full,
            alpha_history,
            t: prev.t + 1,
        },
        assignment,
        estimates,
    })
}

fn init_covers(
    init: &ClusterAssignment,
    current: &ProximityMatrix,
    clusterer: &dyn StaticClusterer,
) -> bool {
    init.ids() == current.ids()
        && clusterer
            .fixed_k()
            .map_or(true, |k| init.occupied_clusters() == k)
}

/// Rebuilds the full-size smoothed matrix: smoothed values over the shared
/// block, raw observations for every entry touching a new object.
pub(crate) fn merge_with_new(
    psi_core: &ProximityMatrix,
    current: &ProximityMatrix,
    alignment: &Alignment,
) -> ProximityMatrix {
    if alignment.new_indices.is_empty() {
        return psi_core.clone();
    }
    let mut values = current.values().clone();
    for (a, &i) in alignment.shared_indices.iter().enumerate() {
        for (b, &j) in alignment.shared_indices.iter().enumerate() {
            values[[i, j]] = psi_core.values()[[a, b]];
        }
    }
    ProximityMatrix::from_valid_parts(current.kind(), values, current.ids().to_vec())
}
