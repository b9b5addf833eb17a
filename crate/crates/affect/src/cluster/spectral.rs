//! Spectral clustering on a similarity matrix.
//!
//! Three relaxations are supported, differing in the operator whose extreme
//! eigenvectors form the embedding:
//!
//! * average association: top-k eigenvectors of `W` itself;
//! * ratio cut: bottom-k eigenvectors of the unnormalized Laplacian
//!   `L = D - W`;
//! * normalized cut: bottom-k eigenvectors of `I - D^{-1/2} W D^{-1/2}`,
//!   with the embedding rows rescaled to unit length.
//!
//! The discrete assignment comes from k-means on the embedding rows, run
//! with 10 restarts seeded from the caller's seed. Zero degrees (isolated
//! vertices) get an epsilon so the normalized operator stays defined.

use ndarray::Array2;

use crate::assignment::ClusterAssignment;
use crate::cluster::kmeans::{kmeans_features, KmeansInit, KmeansResult};
use crate::error::{Error, Result};
use crate::linalg::{eigh, EigenDecomposition};
use crate::proximity::{ProximityKind, ProximityMatrix};
use crate::util::derive_seed;

const EMBEDDING_RESTARTS: usize = 10;
const DEGREE_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralVariant {
    AverageAssociation,
    RatioCut,
    NormalizedCut,
}

impl SpectralVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            SpectralVariant::AverageAssociation => "average-association",
            SpectralVariant::RatioCut => "ratio-cut",
            SpectralVariant::NormalizedCut => "normalized-cut",
        }
    }
}

fn operator_for(w: &ProximityMatrix, variant: SpectralVariant) -> Array2<f64> {
    let n = w.n();
    let values = w.values();
    match variant {
        SpectralVariant::AverageAssociation => values.clone(),
        SpectralVariant::RatioCut => {
            let mut l = -values.clone();
            for i in 0..n {
                let degree: f64 = values.row(i).sum();
                l[[i, i]] += degree + values[[i, i]];
            }
            l
        }
        SpectralVariant::NormalizedCut => {
            let inv_sqrt: Vec<f64> = (0..n)
                .map(|i| {
                    let degree: f64 = values.row(i).sum();
                    let degree = if degree > 0.0 { degree } else { DEGREE_EPSILON };
                    1.0 / degree.sqrt()
                })
                .collect();
            let mut l = Array2::zeros((n, n));
            for i in 0..n {
                for j in 0..n {
                    l[[i, j]] = -inv_sqrt[i] * values[[i, j]] * inv_sqrt[j];
                }
                l[[i, i]] += 1.0;
            }
            l
        }
    }
}

fn embedding(dec: &EigenDecomposition, k: usize, variant: SpectralVariant) -> Array2<f64> {
    let mut z = match variant {
        SpectralVariant::AverageAssociation => dec.top_vectors(k),
        SpectralVariant::RatioCut | SpectralVariant::NormalizedCut => dec.bottom_vectors(k),
    };
    if variant == SpectralVariant::NormalizedCut {
        for mut row in z.rows_mut() {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.mapv_inplace(|v| v / norm);
            }
        }
    }
    z
}

fn cluster_embedding(
    z: &Array2<f64>,
    ids: &[String],
    k: usize,
    seed: u64,
) -> Result<ClusterAssignment> {
    let mut best: Option<KmeansResult> = None;
    for r in 0..EMBEDDING_RESTARTS {
        let result = kmeans_features(z, ids, k, KmeansInit::Seed(derive_seed(seed, r as u64)))?;
        if best.as_ref().is_none_or(|b| result.cost < b.cost) {
            best = Some(result);
        }
    }
    Ok(best.expect("at least one restart").assignment)
}

fn check_input(w: &ProximityMatrix, k: usize) -> Result<()> {
    if w.kind() != ProximityKind::Similarity {
        return Err(Error::WrongKind {
            expected: "similarity",
            got: w.kind().as_str(),
        });
    }
    if k == 0 || k > w.n() {
        return Err(Error::KOutOfRange { k, n: w.n() });
    }
    Ok(())
}

/// Spectral clustering into exactly `k` clusters.
pub fn spectral(
    w: &ProximityMatrix,
    k: usize,
    variant: SpectralVariant,
    seed: u64,
) -> Result<ClusterAssignment> {
    check_input(w, k)?;
    let dec = eigh(&operator_for(w, variant))?;
    let z = embedding(&dec, k, variant);
    cluster_embedding(&z, w.ids(), k, seed)
}

/// Newman's weighted modularity of an assignment:
///
/// ```text
/// Q = sum_c [ in_c / (2m) - (deg_c / (2m))^2 ]
/// ```
///
/// where `in_c` sums all entries inside cluster c, `deg_c` sums the row
/// sums of its members, and `2m` is the total weight. An all-zero matrix
/// has modularity 0 for every partition.
pub fn modularity(w: &ProximityMatrix, assignment: &ClusterAssignment) -> Result<f64> {
    if w.ids() != assignment.ids() {
        return Err(Error::IdMismatch(
            "modularity needs the clustering of the same objects".into(),
        ));
    }
    let n = w.n();
    let values = w.values();
    let total: f64 = values.iter().sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let labels = assignment.labels();
    let k = assignment.k();
    let mut in_weight = vec![0.0; k];
    let mut degree = vec![0.0; k];
    for i in 0..n {
        let row_sum: f64 = values.row(i).sum();
        degree[labels[i]] += row_sum;
        for j in 0..n {
            if labels[i] == labels[j] {
                in_weight[labels[i]] += values[[i, j]];
            }
        }
    }
    let mut q = 0.0;
    for c in 0..k {
        let frac_in = in_weight[c] / total;
        let frac_deg = degree[c] / total;
        q += frac_in - frac_deg * frac_deg;
    }
    Ok(q)
}

/// Clusters at every k in `lo..=hi` and keeps the assignment with the
/// highest modularity; exact ties resolve to the smaller k. The operator is
/// decomposed once and shared across candidates.
pub fn select_k_modularity(
    w: &ProximityMatrix,
    lo: usize,
    hi: usize,
    variant: SpectralVariant,
    seed: u64,
) -> Result<ClusterAssignment> {
    if lo > hi {
        return Err(Error::EmptyRange);
    }
    if lo == 0 || hi > w.n() {
        return Err(Error::KOutOfRange { k: hi.max(1), n: w.n() });
    }
    check_input(w, lo)?;
    let dec = eigh(&operator_for(w, variant))?;
    let mut best: Option<(f64, ClusterAssignment)> = None;
    for k in lo..=hi {
        let z = embedding(&dec, k, variant);
        let assignment = cluster_embedding(&z, w.ids(), k, derive_seed(seed, k as u64))?;
        let q = modularity(w, &assignment)?;
        if best.as_ref().is_none_or(|(bq, _)| q > *bq) {
            best = Some((q, assignment));
        }
    }
    Ok(best.expect("nonempty range").1)
}
