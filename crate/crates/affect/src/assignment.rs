//! Cluster assignments: a label per object id.

use crate::error::{Error, Result};

/// A partition of objects into `k` labeled clusters.
///
/// Clusterer output is canonical: every label in `0..k` has at least one
/// member. Relabeling an assignment to keep labels stable across time steps
/// can leave gaps in the label space, so [`ClusterAssignment::with_label_space`]
/// admits empty labels while still bounding them by `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    ids: Vec<String>,
    labels: Vec<usize>,
    k: usize,
}

impl ClusterAssignment {
    /// Builds a canonical assignment; `k` is inferred as the largest label
    /// plus one and every cluster must be nonempty.
    pub fn new(ids: Vec<String>, labels: Vec<usize>) -> Result<Self> {
        if ids.len() != labels.len() || ids.is_empty() {
            return Err(Error::DimensionMismatch {
                rows: labels.len(),
                cols: 1,
                expected: ids.len(),
            });
        }
        let k = labels.iter().max().copied().unwrap_or(0) + 1;
        let mut counts = vec![0usize; k];
        for &l in &labels {
            counts[l] += 1;
        }
        if let Some(c) = counts.iter().position(|&c| c == 0) {
            return Err(Error::EmptyCluster(c));
        }
        Ok(Self { ids, labels, k })
    }

    /// Builds an assignment over an explicit label space of size `k`,
    /// allowing empty labels.
    pub fn with_label_space(ids: Vec<String>, labels: Vec<usize>, k: usize) -> Result<Self> {
        if ids.len() != labels.len() || ids.is_empty() {
            return Err(Error::DimensionMismatch {
                rows: labels.len(),
                cols: 1,
                expected: ids.len(),
            });
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::LabelOutOfRange { label: l, k });
        }
        Ok(Self { ids, labels, k })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// Size of the label space.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of labels that actually have members.
    pub fn occupied_clusters(&self) -> usize {
        let mut seen = vec![false; self.k];
        for &l in &self.labels {
            seen[l] = true;
        }
        seen.iter().filter(|&&s| s).count()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn label_of(&self, index: usize) -> usize {
        self.labels[index]
    }

    /// Object indices belonging to cluster `c`.
    pub fn members(&self, c: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == c)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.k];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Restriction to the objects at the given indices, keeping labels and
    /// the label space. The result may have empty clusters.
    pub fn restrict(&self, indices: &[usize]) -> Self {
        Self {
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            k: self.k,
        }
    }

    /// Applies `map[old_label] = new_label`, expanding the label space to
    /// fit the largest new label.
    pub fn relabeled(&self, map: &[usize]) -> Self {
        let labels: Vec<usize> = self.labels.iter().map(|&l| map[l]).collect();
        let k = labels.iter().max().copied().unwrap_or(0) + 1;
        Self {
            ids: self.ids.clone(),
            labels,
            k: k.max(self.k),
        }
    }

    /// True when both assignments place every shared pair of objects in the
    /// same relation (together or apart). Labels themselves may differ.
    pub fn same_partition(&self, other: &ClusterAssignment) -> bool {
        if self.ids != other.ids {
            return false;
        }
        let n = self.n();
        for i in 0..n {
            for j in (i + 1)..n {
                let a = self.labels[i] == self.labels[j];
                let b = other.labels[i] == other.labels[j];
                if a != b {
                    return false;
                }
            }
        }
        true
    }
}
