//! Dynamic Gaussian mixture scenarios with analytic moment oracles.
//!
//! Objects keep fixed component memberships while component means drift,
//! covariances switch, and mixture proportions rebalance on a schedule.
//! Every step draws a fresh sample and reports the dot-product similarity
//! matrix together with its exact entrywise mean and variance. For
//! `x_i ~ N(mu_c, S_c)` and `x_j ~ N(mu_d, S_d)` independent, the dot
//! product `w_ij = x_i . x_j` has
//!
//! ```text
//! E[w_ij]   = sum_k mu_ck mu_dk                                   (i != j)
//! var(w_ij) = sum_kl { S_ckl S_dkl + S_ckl mu_dk mu_dl + S_dkl mu_ck mu_cl }
//! E[w_ii]   = sum_k (S_ckk + mu_ck^2)
//! var(w_ii) = sum_kl { 4 mu_ck mu_cl S_ckl + 2 S_ckl^2 }
//! ```
//!
//! so both oracle matrices are block-constant under the memberships. The
//! oracle forgetting factor replays the smoothing recursion against these
//! true moments, giving the unattainable reference that an estimated
//! factor is judged against.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::assignment::ClusterAssignment;
use crate::error::{Error, Result};
use crate::proximity::{ProximityKind, ProximityMatrix};

/// Per-step drift applied to component means before sampling.
#[derive(Debug, Clone)]
pub enum MeanWalk {
    /// Means never move.
    Fixed,
    /// Every component takes an independent +/-`step` move along one
    /// coordinate at every step after the first.
    RandomSteps { dimension: usize, step: f64 },
    /// One component moves by `velocity` at every step in
    /// `from_t..=to_t`; the others stay put.
    Linear {
        cluster: usize,
        velocity: Vec<f64>,
        from_t: usize,
        to_t: usize,
    },
}

/// Scheduled parameter changes, applied before sampling at their step.
#[derive(Debug, Clone)]
pub enum GmmEvent {
    SetCovariance {
        t: usize,
        cluster: usize,
        covariance: Array2<f64>,
    },
    /// Rebalances memberships to the new proportions: surplus clusters give
    /// up uniformly chosen members, deficit clusters absorb them in index
    /// order.
    SetProportions { t: usize, proportions: Vec<f64> },
}

impl GmmEvent {
    fn time(&self) -> usize {
        match self {
            GmmEvent::SetCovariance { t, .. } | GmmEvent::SetProportions { t, .. } => *t,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DynamicGmmConfig {
    /// Initial component means, one vector per component.
    pub means: Vec<Vec<f64>>,
    /// Initial component covariances, symmetric PSD.
    pub covariances: Vec<Array2<f64>>,
    /// Mixture proportions; translated to exact member counts by largest
    /// remainder, assigned in object-index order.
    pub proportions: Vec<f64>,
    /// Number of objects.
    pub n: usize,
    /// Number of observation steps to generate.
    pub steps: usize,
    pub walk: MeanWalk,
    pub events: Vec<GmmEvent>,
}

/// One observation step: a fresh sample plus the exact moments of its
/// similarity matrix.
#[derive(Debug, Clone)]
pub struct GmmStepOutput {
    pub features: Array2<f64>,
    pub similarity: ProximityMatrix,
    pub memberships: ClusterAssignment,
    /// Entrywise expectation of the similarity matrix.
    pub oracle_psi: ProximityMatrix,
    /// Entrywise variance of the similarity matrix.
    pub oracle_var: Array2<f64>,
}

impl DynamicGmmConfig {
    fn validate(&self) -> Result<()> {
        let k = self.means.len();
        if k == 0 || self.n == 0 || self.steps == 0 {
            return Err(Error::BadConfig(
                "mixture needs at least one component, one object and one step".into(),
            ));
        }
        let p = self.means[0].len();
        if p == 0 {
            return Err(Error::BadConfig("component means need at least one dimension".into()));
        }
        if self.means.iter().any(|m| m.len() != p) {
            return Err(Error::BadConfig("component means differ in dimension".into()));
        }
        if self.covariances.len() != k
            || self.covariances.iter().any(|c| c.dim() != (p, p))
        {
            return Err(Error::BadConfig(
                "need one p x p covariance per component".into(),
            ));
        }
        validate_proportions(&self.proportions, k)?;
        match &self.walk {
            MeanWalk::Fixed => {}
            MeanWalk::RandomSteps { dimension, .. } => {
                if *dimension >= p {
                    return Err(Error::BadConfig("walk dimension out of range".into()));
                }
            }
            MeanWalk::Linear { cluster, velocity, .. } => {
                if *cluster >= k || velocity.len() != p {
                    return Err(Error::BadConfig("linear walk cluster or velocity invalid".into()));
                }
            }
        }
        for event in &self.events {
            if event.time() >= self.steps {
                return Err(Error::BadConfig("event scheduled beyond the horizon".into()));
            }
            match event {
                GmmEvent::SetCovariance { cluster, covariance, .. } => {
                    if *cluster >= k || covariance.dim() != (p, p) {
                        return Err(Error::BadConfig("covariance event malformed".into()));
                    }
                }
                GmmEvent::SetProportions { proportions, .. } => {
                    validate_proportions(proportions, k)?;
                }
            }
        }
        Ok(())
    }
}

fn validate_proportions(proportions: &[f64], k: usize) -> Result<()> {
    if proportions.len() != k || proportions.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
        return Err(Error::BadConfig("proportions need one entry in [0,1] per component".into()));
    }
    let sum: f64 = proportions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::BadConfig(format!("proportions sum to {sum}, expected 1")));
    }
    Ok(())
}

/// Exact integer counts for fractional proportions: floors first, then the
/// leftover seats go to the largest remainders (ties to the lower index).
fn largest_remainder(proportions: &[f64], n: usize) -> Vec<usize> {
    let quotas: Vec<f64> = proportions.iter().map(|p| p * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..proportions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap()
    });
    for &c in order.iter().take(n - assigned) {
        counts[c] += 1;
    }
    counts
}

/// Lower-triangular factor L with A = L L^T, tolerating semidefinite input
/// (zero pivots produce zero columns).
fn psd_factor(a: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    let scale = a.diag().iter().fold(1.0f64, |m, d| m.max(d.abs()));
    let tol = 1e-12 * scale;
    let mut l: Array2<f64> = Array2::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if d > tol {
            let root = d.sqrt();
            l[[j, j]] = root;
            for i in (j + 1)..n {
                let mut s = a[[i, j]];
                for k in 0..j {
                    s -= l[[i, k]] * l[[j, k]];
                }
                l[[i, j]] = s / root;
            }
        } else if d < -tol {
            return Err(Error::NotPsd { index: j, pivot: d });
        }
        // Semidefinite pivot: leave the column at zero.
    }
    Ok(l)
}

fn rebalance(labels: &mut [usize], proportions: &[f64], k: usize, rng: &mut ChaCha8Rng) {
    let n = labels.len();
    let target = largest_remainder(proportions, n);
    let mut counts = vec![0usize; k];
    for &l in labels.iter() {
        counts[l] += 1;
    }
    let mut pool: Vec<usize> = Vec::new();
    for c in 0..k {
        if counts[c] > target[c] {
            let members: Vec<usize> = labels
                .iter()
                .enumerate()
                .filter(|&(_, &l)| l == c)
                .map(|(i, _)| i)
                .collect();
            let chosen = rand::seq::index::sample(rng, members.len(), counts[c] - target[c]);
            for idx in chosen.iter() {
                pool.push(members[idx]);
            }
        }
    }
    let mut pool = pool.into_iter();
    for c in 0..k {
        for _ in counts[c]..target[c] {
            let object = pool.next().expect("surplus covers deficit");
            labels[object] = c;
        }
    }
}

/// Exact mean and variance of every similarity entry under the given
/// component parameters and memberships.
pub fn oracle_moments(
    means: &[Array1<f64>],
    covariances: &[Array2<f64>],
    memberships: &ClusterAssignment,
) -> Result<(ProximityMatrix, Array2<f64>)> {
    let k = means.len();
    if covariances.len() != k || k == 0 {
        return Err(Error::DimensionMismatch {
            rows: covariances.len(),
            cols: 1,
            expected: k.max(1),
        });
    }
    let p = means[0].len();
    if means.iter().any(|m| m.len() != p) || covariances.iter().any(|c| c.dim() != (p, p)) {
        return Err(Error::DimensionMismatch { rows: p, cols: p, expected: p });
    }
    if memberships.k() > k {
        return Err(Error::LabelOutOfRange { label: memberships.k() - 1, k });
    }

    let mut cross_mean = Array2::zeros((k, k));
    let mut cross_var = Array2::zeros((k, k));
    for c in 0..k {
        for d in 0..k {
            cross_mean[[c, d]] = means[c].dot(&means[d]);
            let mut v = 0.0;
            for a in 0..p {
                for b in 0..p {
                    v += covariances[c][[a, b]] * covariances[d][[a, b]]
                        + covariances[c][[a, b]] * means[d][a] * means[d][b]
                        + covariances[d][[a, b]] * means[c][a] * means[c][b];
                }
            }
            cross_var[[c, d]] = v;
        }
    }
    let mut self_mean = vec![0.0; k];
    let mut self_var = vec![0.0; k];
    for c in 0..k {
        for a in 0..p {
            self_mean[c] += covariances[c][[a, a]] + means[c][a] * means[c][a];
            for b in 0..p {
                let s = covariances[c][[a, b]];
                self_var[c] += 4.0 * means[c][a] * means[c][b] * s + 2.0 * s * s;
            }
        }
    }

    let n = memberships.n();
    let labels = memberships.labels();
    let mut psi = Array2::zeros((n, n));
    let mut var = Array2::zeros((n, n));
    for i in 0..n {
        psi[[i, i]] = self_mean[labels[i]];
        var[[i, i]] = self_var[labels[i]];
        for j in 0..n {
            if i != j {
                psi[[i, j]] = cross_mean[[labels[i], labels[j]]];
                var[[i, j]] = cross_var[[labels[i], labels[j]]];
            }
        }
    }
    let psi = ProximityMatrix::new(
        ProximityKind::Similarity,
        psi,
        memberships.ids().to_vec(),
    )?;
    Ok((psi, var))
}

/// Generates the full observation sequence for a dynamic mixture scenario.
/// Memberships are fixed at the first step and change only through
/// proportion events.
pub fn gmm_run(config: &DynamicGmmConfig, seed: u64) -> Result<Vec<GmmStepOutput>> {
    config.validate()?;
    let k = config.means.len();
    let p = config.means[0].len();
    let ids: Vec<String> = (0..config.n).map(|i| format!("o{i}")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut means: Vec<Array1<f64>> = config
        .means
        .iter()
        .map(|m| Array1::from_vec(m.clone()))
        .collect();
    let mut covariances = config.covariances.clone();
    let mut factors: Vec<Array2<f64>> = covariances
        .iter()
        .map(psd_factor)
        .collect::<Result<Vec<_>>>()?;

    let counts = largest_remainder(&config.proportions, config.n);
    let mut labels: Vec<usize> = Vec::with_capacity(config.n);
    for (c, &m) in counts.iter().enumerate() {
        labels.extend(std::iter::repeat_n(c, m));
    }

    let mut outputs = Vec::with_capacity(config.steps);
    for t in 0..config.steps {
        if t > 0 {
            match &config.walk {
                MeanWalk::Fixed => {}
                MeanWalk::RandomSteps { dimension, step } => {
                    for mean in means.iter_mut() {
                        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                        mean[*dimension] += sign * step;
                    }
                }
                MeanWalk::Linear { cluster, velocity, from_t, to_t } => {
                    if (*from_t..=*to_t).contains(&t) {
                        for (d, v) in velocity.iter().enumerate() {
                            means[*cluster][d] += v;
                        }
                    }
                }
            }
        }
        for event in config.events.iter().filter(|e| e.time() == t) {
            match event {
                GmmEvent::SetCovariance { cluster, covariance, .. } => {
                    factors[*cluster] = psd_factor(covariance)?;
                    covariances[*cluster] = covariance.clone();
                }
                GmmEvent::SetProportions { proportions, .. } => {
                    rebalance(&mut labels, proportions, k, &mut rng);
                }
            }
        }

        let mut features = Array2::zeros((config.n, p));
        for i in 0..config.n {
            let c = labels[i];
            let z: Array1<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
            let x = &means[c] + &factors[c].dot(&z);
            features.row_mut(i).assign(&x);
        }
        let similarity = ProximityMatrix::dot_product_gram(&features, ids.clone())?;
        let memberships = ClusterAssignment::with_label_space(ids.clone(), labels.clone(), k)?;
        let (oracle_psi, oracle_var) = oracle_moments(&means, &covariances, &memberships)?;
        outputs.push(GmmStepOutput {
            features,
            similarity,
            memberships,
            oracle_psi,
            oracle_var,
        });
    }
    Ok(outputs)
}

/// Trajectory of the smoothing recursion driven by the true moments: at
/// each step the forgetting factor is the exact minimizer of the expected
/// squared tracking error given the running smoothed matrix, the true
/// expectation and the true variance.
#[derive(Debug, Clone)]
pub struct OracleRun {
    /// `alphas[t-1]` is the factor applied at step `t`.
    pub alphas: Vec<f64>,
    /// Smoothed matrix after each step, starting from the first observation.
    pub smoothed: Vec<Array2<f64>>,
    /// Mean squared error of the smoothed matrix against the true
    /// expectation at each step.
    pub mse: Vec<f64>,
}

/// Replays smoothing over observed similarities with the oracle factor
///
/// ```text
/// alpha*_t = sum var_t / sum [ (psi_hat_{t-1} - E[W^t])^2 + var_t ]
/// ```
///
/// where the sums run over all matrix entries. A zero denominator gives 0.
pub fn oracle_alpha_run(steps: &[GmmStepOutput]) -> Result<OracleRun> {
    let observed: Vec<&ProximityMatrix> = steps.iter().map(|s| &s.similarity).collect();
    let truth_mean: Vec<&ProximityMatrix> = steps.iter().map(|s| &s.oracle_psi).collect();
    let truth_var: Vec<&Array2<f64>> = steps.iter().map(|s| &s.oracle_var).collect();
    oracle_alpha_series(&observed, &truth_mean, &truth_var)
}

/// The same oracle replay over bare per-step matrices, for callers that hold
/// observations and true moments separately (for example a replayed dump).
pub fn oracle_alpha_series(
    observed: &[&ProximityMatrix],
    truth_mean: &[&ProximityMatrix],
    truth_var: &[&Array2<f64>],
) -> Result<OracleRun> {
    if observed.is_empty() {
        return Err(Error::BadConfig("oracle run needs at least one step".into()));
    }
    if observed.len() != truth_mean.len() || observed.len() != truth_var.len() {
        return Err(Error::BadConfig(format!(
            "oracle run needs matching series lengths, got {} observations, {} means, {} variances",
            observed.len(),
            truth_mean.len(),
            truth_var.len()
        )));
    }
    let mut smoothed: Vec<Array2<f64>> = Vec::with_capacity(observed.len());
    let mut alphas = Vec::with_capacity(observed.len().saturating_sub(1));
    let mut mse = Vec::with_capacity(observed.len());
    let mut current = observed[0].values().clone();
    mse.push(mean_squared_difference(&current, truth_mean[0].values()));
    smoothed.push(current.clone());
    for t in 1..observed.len() {
        let truth = truth_mean[t].values();
        let var = truth_var[t];
        let mut numerator = 0.0;
        let mut denominator = 0.0;
        for ((prev, truth_entry), v) in current.iter().zip(truth.iter()).zip(var.iter()) {
            let bias = prev - truth_entry;
            numerator += v;
            denominator += bias * bias + v;
        }
        let alpha = if denominator > 0.0 {
            (numerator / denominator).clamp(0.0, 1.0)
        } else {
            0.0
        };
        current = alpha * &current + (1.0 - alpha) * observed[t].values();
        mse.push(mean_squared_difference(&current, truth));
        smoothed.push(current.clone());
        alphas.push(alpha);
    }
    Ok(OracleRun { alphas, smoothed, mse })
}

fn mean_squared_difference(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let count = a.len().max(1) as f64;
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / count
}
