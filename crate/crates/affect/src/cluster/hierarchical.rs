//! Agglomerative hierarchical clustering with single, complete and average
//! linkage.
//!
//! Clusters are numbered the usual way: leaves are `0..n` and the cluster
//! created by merge step `s` (0-based) gets index `n + s`. Ties on the merge
//! height are broken toward the lexicographically smallest index pair, which
//! keeps the dendrogram reproducible on data with repeated distances.

use crate::assignment::ClusterAssignment;
use crate::error::{Error, Result};
use crate::proximity::{ProximityKind, ProximityMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Linkage {
    Single,
    Complete,
    Average,
}

impl Linkage {
    /// Lance-Williams style combination of the dissimilarities from two
    /// merged clusters (sizes `na`, `nb`) to a third cluster.
    fn combine(&self, da: f64, db: f64, na: usize, nb: usize) -> f64 {
        match self {
            Linkage::Single => da.min(db),
            Linkage::Complete => da.max(db),
            Linkage::Average => {
                (na as f64 * da + nb as f64 * db) / (na + nb) as f64
            }
        }
    }
}

/// One merge: clusters `a < b` joined at the given linkage height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
}

/// The full merge tree over the clustered objects.
#[derive(Debug, Clone)]
pub struct Dendrogram {
    ids: Vec<String>,
    merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }
}

/// Builds the dendrogram for a dissimilarity matrix.
pub fn hierarchical(matrix: &ProximityMatrix, linkage: Linkage) -> Result<Dendrogram> {
    if matrix.kind() != ProximityKind::Dissimilarity {
        return Err(Error::WrongKind {
            expected: "dissimilarity",
            got: matrix.kind().as_str(),
        });
    }
    let n = matrix.n();
    if n == 0 {
        return Err(Error::KOutOfRange { k: 1, n: 0 });
    }

    // Active clusters: dendrogram index, size, and pairwise dissimilarities
    // kept as a dense matrix over active slots.
    let mut ids: Vec<usize> = (0..n).collect();
    let mut sizes: Vec<usize> = vec![1; n];
    let mut d: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| matrix.values()[[i, j]]).collect())
        .collect();

    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for step in 0..n.saturating_sub(1) {
        let active = ids.len();
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..active {
            for b in (a + 1)..active {
                let height = d[a][b];
                let pair = (ids[a].min(ids[b]), ids[a].max(ids[b]));
                let better = match best {
                    None => true,
                    Some((h, i, j)) => {
                        height < h || (height == h && pair < (i, j))
                    }
                };
                if better {
                    best = Some((height, pair.0, pair.1));
                }
            }
        }
        let (height, id_a, id_b) = best.expect("at least two active clusters");
        let slot_a = ids.iter().position(|&x| x == id_a).unwrap();
        let slot_b = ids.iter().position(|&x| x == id_b).unwrap();
        let (lo, hi) = (slot_a.min(slot_b), slot_a.max(slot_b));

        let (na, nb) = (sizes[lo], sizes[hi]);
        for c in 0..active {
            if c == lo || c == hi {
                continue;
            }
            let combined = linkage.combine(d[lo][c], d[hi][c], na, nb);
            d[lo][c] = combined;
            d[c][lo] = combined;
        }
        ids[lo] = n + step;
        sizes[lo] = na + nb;
        ids.remove(hi);
        sizes.remove(hi);
        d.remove(hi);
        for row in d.iter_mut() {
            row.remove(hi);
        }

        merges.push(Merge {
            a: id_a,
            b: id_b,
            height,
        });
    }

    Ok(Dendrogram {
        ids: matrix.ids().to_vec(),
        merges,
    })
}

/// Cuts the dendrogram into `k` clusters by undoing the last `k - 1`
/// merges. Clusters are labeled in order of their smallest member index.
pub fn cut(dendrogram: &Dendrogram, k: usize) -> Result<ClusterAssignment> {
    let n = dendrogram.n();
    if k == 0 || k > n {
        return Err(Error::KOutOfRange { k, n });
    }
    // members[c] lists the leaves of dendrogram cluster c; merged clusters
    // leave their slots empty.
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    members.resize(2 * n - 1, Vec::new());
    let mut alive: Vec<usize> = (0..n).collect();
    for (step, merge) in dendrogram.merges[..n - k].iter().enumerate() {
        let mut merged = std::mem::take(&mut members[merge.a]);
        merged.append(&mut std::mem::take(&mut members[merge.b]));
        members[n + step] = merged;
        alive.retain(|&c| c != merge.a && c != merge.b);
        alive.push(n + step);
    }

    let mut groups: Vec<Vec<usize>> = alive
        .into_iter()
        .map(|c| members[c].clone())
        .collect();
    groups.sort_by_key(|g| g.iter().min().copied().unwrap_or(usize::MAX));
    let mut labels = vec![0usize; n];
    for (label, group) in groups.iter().enumerate() {
        for &i in group {
            labels[i] = label;
        }
    }
    ClusterAssignment::new(dendrogram.ids.to_vec(), labels)
}
