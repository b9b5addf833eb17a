//! Deterministic property checks shared by the property and acceptance
//! suites. Each check walks a seeded family of random instances and returns
//! a description of the first violation, so the acceptance gate can report
//! them wholesale while the property suite keeps one test per claim.
#![allow(dead_code)]

use affect::assignment::ClusterAssignment;
use affect::baselines::{BaselineKind, BaselineTracker};
use affect::cluster::{kmeans_features, kmeans_similarity, KmeansInit};
use affect::eval::{hungarian, rand_index};
use affect::linalg::{eigh, frobenius};
use affect::tracking::{
    estimate_alpha, estimate_block_moments, expanded_weights, smooth_update,
};
use affect::{ProximityKind, ProximityMatrix};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn object_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("o{i}")).collect()
}

pub fn random_symmetric(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut values = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let v = (rng.random::<f64>() * 2.0 - 1.0) * scale;
            values[[i, j]] = v;
            values[[j, i]] = v;
        }
    }
    values
}

pub fn random_similarity(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> ProximityMatrix {
    ProximityMatrix::new(
        ProximityKind::Similarity,
        random_symmetric(n, scale, rng),
        object_ids(n),
    )
    .unwrap()
}

fn fail(message: String) -> Result<(), String> {
    Err(message)
}

/// The recursion's implicit per-observation weights form a convex
/// combination for any factor history.
pub fn check_weights_sum_to_one() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for case in 0..400usize {
        let len = case % 41;
        let history: Vec<f64> = (0..len)
            .map(|i| match i % 7 {
                0 => 0.0,
                1 => 1.0,
                _ => rng.random::<f64>(),
            })
            .collect();
        let weights = expanded_weights(&history).map_err(|e| e.to_string())?;
        if weights.len() != len + 1 {
            return fail(format!(
                "history of length {len} produced {} weights",
                weights.len()
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return fail(format!("weights sum to {sum} for history {history:?}"));
        }
        if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return fail(format!("weight outside [0, 1] for history {history:?}"));
        }
    }
    Ok(())
}

/// Applying the smoothing recursion step by step equals the expanded
/// weighted sum over all past observations.
pub fn check_sequential_equals_expansion() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for case in 0..60usize {
        let n = 2 + case % 5;
        let t = 1 + case % 8;
        let observations: Vec<ProximityMatrix> =
            (0..=t).map(|_| random_similarity(n, 2.0, &mut rng)).collect();
        let alphas: Vec<f64> = (0..t).map(|_| rng.random::<f64>()).collect();

        let mut sequential = observations[0].clone();
        for (s, alpha) in alphas.iter().enumerate() {
            sequential =
                smooth_update(&sequential, &observations[s + 1], *alpha).map_err(|e| e.to_string())?;
        }

        let weights = expanded_weights(&alphas).map_err(|e| e.to_string())?;
        let mut expansion = Array2::<f64>::zeros((n, n));
        for (w, obs) in weights.iter().zip(&observations) {
            expansion = expansion + *w * obs.values();
        }

        let diff = (sequential.values() - &expansion)
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if diff > 1e-9 {
            return fail(format!(
                "sequential and expanded smoothing differ by {diff} on case {case}"
            ));
        }
    }
    Ok(())
}

/// The estimated forgetting factor is always a finite value in [0, 1],
/// whatever the matrices and clustering look like.
pub fn check_alpha_stays_in_unit_interval() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for case in 0..1000usize {
        let n = 2 + case % 7;
        let k = 1 + case % 3;
        let scale = 10f64.powi((case % 5) as i32 - 2);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let clusters =
            ClusterAssignment::with_label_space(object_ids(n), labels, k).map_err(|e| e.to_string())?;
        let w = random_similarity(n, scale, &mut rng);
        let prev = random_similarity(n, scale, &mut rng);
        let moments = estimate_block_moments(&w, &clusters).map_err(|e| e.to_string())?;
        let estimate =
            estimate_alpha(&prev, &moments, &clusters).map_err(|e| e.to_string())?;
        if !estimate.alpha.is_finite() || !(0.0..=1.0).contains(&estimate.alpha) {
            return fail(format!(
                "alpha {} escaped [0, 1] on case {case}",
                estimate.alpha
            ));
        }
    }
    Ok(())
}

/// Noise-free data pins the factor at zero; a bias-free previous estimate
/// with residual noise pins it at one.
pub fn check_alpha_extremes() -> Result<(), String> {
    let ids = object_ids(6);
    let labels = vec![0, 0, 0, 1, 1, 1];
    let clusters = ClusterAssignment::new(ids.clone(), labels).map_err(|e| e.to_string())?;

    // Block-constant observation: every family has zero sample variance.
    let mut flat = Array2::zeros((6, 6));
    for i in 0..6 {
        for j in 0..6 {
            let (c, d) = (i / 3, j / 3);
            flat[[i, j]] = if i == j {
                5.0 + 2.0 * c as f64
            } else if c == d {
                2.0 + c as f64
            } else {
                1.0
            };
        }
    }
    let w = ProximityMatrix::new(ProximityKind::Similarity, flat.clone(), ids.clone())
        .map_err(|e| e.to_string())?;
    let prev = ProximityMatrix::new(ProximityKind::Similarity, &flat + 0.7, ids.clone())
        .map_err(|e| e.to_string())?;
    let moments = estimate_block_moments(&w, &clusters).map_err(|e| e.to_string())?;
    let zero_var = estimate_alpha(&prev, &moments, &clusters).map_err(|e| e.to_string())?;
    if zero_var.alpha != 0.0 {
        return fail(format!(
            "zero-variance observation gave alpha {}",
            zero_var.alpha
        ));
    }

    // Noisy observation whose block means equal the previous estimate:
    // zero bias everywhere, so the ratio is exactly one.
    let ids4 = object_ids(4);
    let labels4 = vec![0, 0, 1, 1];
    let clusters4 = ClusterAssignment::new(ids4.clone(), labels4).map_err(|e| e.to_string())?;
    let mut noisy = Array2::zeros((4, 4));
    noisy[[0, 0]] = 1.0;
    noisy[[1, 1]] = 3.0;
    noisy[[2, 2]] = 4.0;
    noisy[[3, 3]] = 8.0;
    noisy[[0, 1]] = 0.5;
    noisy[[1, 0]] = 0.5;
    noisy[[2, 3]] = 0.25;
    noisy[[3, 2]] = 0.25;
    for i in 0..2 {
        for j in 2..4 {
            let v = 0.1 * (1.0 + (2 * i + j) as f64);
            noisy[[i, j]] = v;
            noisy[[j, i]] = v;
        }
    }
    let w4 = ProximityMatrix::new(ProximityKind::Similarity, noisy.clone(), ids4.clone())
        .map_err(|e| e.to_string())?;
    let moments4 = estimate_block_moments(&w4, &clusters4).map_err(|e| e.to_string())?;
    let (expected, variance) = moments4.expand(&clusters4);
    if variance.iter().all(|&v| v == 0.0) {
        return fail("extreme fixture was meant to carry noise".into());
    }
    let prev4 = ProximityMatrix::new(ProximityKind::Similarity, expected, ids4)
        .map_err(|e| e.to_string())?;
    let zero_bias = estimate_alpha(&prev4, &moments4, &clusters4).map_err(|e| e.to_string())?;
    if zero_bias.alpha != 1.0 {
        return fail(format!(
            "bias-free previous estimate gave alpha {}",
            zero_bias.alpha
        ));
    }
    Ok(())
}

/// The one-step-memory baseline reproduces a tracker that blends only the
/// raw previous observation at the same factor.
pub fn check_pcq_matches_single_step_smoothing() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for case in 0..50usize {
        let alpha = match case % 5 {
            0 => 0.0,
            1 => 1.0,
            _ => rng.random::<f64>(),
        };
        let n = 3 + case % 4;
        let observations: Vec<ProximityMatrix> =
            (0..5).map(|_| random_similarity(n, 1.5, &mut rng)).collect();
        let mut tracker =
            BaselineTracker::new(BaselineKind::Pcq(alpha)).map_err(|e| e.to_string())?;
        for (t, observation) in observations.iter().enumerate() {
            let blended = tracker.step(observation).map_err(|e| e.to_string())?;
            let expected = if t == 0 {
                observation.clone()
            } else {
                smooth_update(&observations[t - 1], observation, alpha)
                    .map_err(|e| e.to_string())?
            };
            let diff = (blended.values() - expected.values())
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            if diff > 1e-12 {
                return fail(format!(
                    "one-step blend differs by {diff} at t={t}, alpha={alpha}"
                ));
            }
        }
    }
    Ok(())
}

/// k-means driven by the Gram matrix follows the feature-space iteration on
/// random instances: the converged partitions coincide (cluster numbering
/// may differ when two tied singletons pick labels in opposite order) and
/// the objectives match.
pub fn check_kmeans_routes_agree() -> Result<(), String> {
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(7000 + seed);
        let n = 6 + (seed % 5) as usize;
        let k = 2 + (seed % 3) as usize;
        let mut x = Array2::zeros((n, 3));
        for i in 0..n {
            for j in 0..3 {
                x[[i, j]] = rng.random::<f64>() * 6.0 - 3.0;
            }
        }
        let w = ProximityMatrix::dot_product_gram(&x, object_ids(n)).map_err(|e| e.to_string())?;
        let by_gram = kmeans_similarity(&w, k, KmeansInit::Seed(seed)).map_err(|e| e.to_string())?;
        let by_features =
            kmeans_features(&x, &object_ids(n), k, KmeansInit::Seed(seed)).map_err(|e| e.to_string())?;
        let agreement = rand_index(&by_gram.assignment, &by_features.assignment)
            .map_err(|e| e.to_string())?;
        if agreement != 1.0 {
            return fail(format!(
                "k-means routes produced different partitions on seed {seed}"
            ));
        }
        let scale = by_features.cost.abs().max(1.0);
        if (by_gram.cost - by_features.cost).abs() > 1e-9 * scale {
            return fail(format!(
                "k-means costs differ on seed {seed}: {} vs {}",
                by_gram.cost, by_features.cost
            ));
        }
    }
    Ok(())
}

fn best_permutation_score(score: &Array2<f64>) -> f64 {
    fn recurse(score: &Array2<f64>, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        let n = score.nrows();
        if row == n {
            *best = best.max(acc);
            return;
        }
        for col in 0..n {
            if !used[col] {
                used[col] = true;
                recurse(score, row + 1, used, acc + score[[row, col]], best);
                used[col] = false;
            }
        }
    }
    let mut best = f64::NEG_INFINITY;
    recurse(score, 0, &mut vec![false; score.nrows()], 0.0, &mut best);
    best
}

/// The assignment solver attains the exact optimum found by enumerating
/// all permutations on small matrices.
pub fn check_hungarian_matches_brute_force() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for case in 0..120usize {
        let n = 1 + case % 6;
        let mut score = Array2::zeros((n, n));
        for v in score.iter_mut() {
            *v = rng.random::<f64>() * 10.0 - 5.0;
        }
        let assignment = hungarian(&score).map_err(|e| e.to_string())?;
        let mut seen = vec![false; n];
        for &col in &assignment {
            if col >= n || seen[col] {
                return fail(format!("assignment {assignment:?} is not a permutation"));
            }
            seen[col] = true;
        }
        let value: f64 = assignment
            .iter()
            .enumerate()
            .map(|(row, &col)| score[[row, col]])
            .sum();
        let best = best_permutation_score(&score);
        if (value - best).abs() > 1e-9 {
            return fail(format!(
                "solver value {value} misses brute-force optimum {best} on case {case}"
            ));
        }
    }
    Ok(())
}

/// The pair-counting index equals its definition evaluated by enumerating
/// every object pair.
pub fn check_rand_index_matches_pair_enumeration() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for case in 0..200usize {
        let n = 2 + case % 7;
        let ka = 1 + case % 4;
        let kb = 1 + (case / 2) % 4;
        let la: Vec<usize> = (0..n).map(|_| rng.random_range(0..ka)).collect();
        let lb: Vec<usize> = (0..n).map(|_| rng.random_range(0..kb)).collect();
        let a = ClusterAssignment::with_label_space(object_ids(n), la.clone(), ka)
            .map_err(|e| e.to_string())?;
        let b = ClusterAssignment::with_label_space(object_ids(n), lb.clone(), kb)
            .map_err(|e| e.to_string())?;
        let fast = rand_index(&a, &b).map_err(|e| e.to_string())?;

        let mut agreements = 0usize;
        let mut pairs = 0usize;
        for i in 0..n {
            for j in (i + 1)..n {
                let same_a = la[i] == la[j];
                let same_b = lb[i] == lb[j];
                if same_a == same_b {
                    agreements += 1;
                }
                pairs += 1;
            }
        }
        let direct = agreements as f64 / pairs as f64;
        if (fast - direct).abs() > 1e-12 {
            return fail(format!(
                "index {fast} disagrees with pair enumeration {direct} on case {case}"
            ));
        }
    }
    Ok(())
}

/// The symmetric eigensolver leaves a small relative residual and an
/// orthonormal basis on random matrices up to 64x64.
pub fn check_eigh_residual() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    for &n in &[2usize, 3, 5, 8, 13, 21, 40, 64] {
        for _ in 0..3 {
            let a = random_symmetric(n, 1.0, &mut rng);
            let decomposition = eigh(&a).map_err(|e| e.to_string())?;
            let v = &decomposition.vectors;
            let mut av_minus_vl = a.dot(v);
            for (j, &lambda) in decomposition.values.iter().enumerate() {
                for i in 0..n {
                    av_minus_vl[[i, j]] -= lambda * v[[i, j]];
                }
            }
            let scale = frobenius(&a).max(1.0);
            let residual = frobenius(&av_minus_vl) / scale;
            if residual > 1e-8 {
                return fail(format!("residual {residual} at n={n}"));
            }
            let gram = v.t().dot(v);
            let mut off = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    let target = if i == j { 1.0 } else { 0.0 };
                    off = off.max((gram[[i, j]] - target).abs());
                }
            }
            if off > 1e-8 {
                return fail(format!("basis departs orthonormality by {off} at n={n}"));
            }
            if decomposition.values.windows(2).any(|w| w[0] > w[1]) {
                return fail(format!("eigenvalues not ascending at n={n}"));
            }
        }
    }
    Ok(())
}
