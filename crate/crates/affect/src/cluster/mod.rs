//! Static clusterers that operate on a single proximity matrix.
//!
//! Three families are provided: agglomerative hierarchical clustering on
//! dissimilarities, k-means expressed purely through a similarity (Gram)
//! matrix, and spectral clustering in the average association, ratio cut
//! and normalized cut variants. Each family also ships a handle type
//! implementing [`StaticClusterer`] so the tracking loop can re-cluster the
//! smoothed matrix without knowing which family it is driving.

pub mod hierarchical;
pub mod kmeans;
pub mod spectral;

pub use hierarchical::{cut, hierarchical, Dendrogram, Linkage, Merge};
pub use kmeans::{kmeans_features, kmeans_similarity, KmeansInit, KmeansResult};
pub use spectral::{modularity, select_k_modularity, spectral, SpectralVariant};

use crate::assignment::ClusterAssignment;
use crate::error::Result;
use crate::proximity::ProximityMatrix;
use crate::util::derive_seed;

/// How the number of clusters is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KSelection {
    Fixed(usize),
    /// Try every k in `lo..=hi` and keep the assignment with the highest
    /// modularity; ties resolve to the smaller k.
    Modularity { lo: usize, hi: usize },
}

/// A clusterer that can be called repeatedly inside the tracking loop.
///
/// `init` is a warm start that implementations may use (k-means) or ignore
/// (hierarchical, spectral). `seed` must make the call deterministic.
pub trait StaticClusterer {
    fn cluster(
        &self,
        matrix: &ProximityMatrix,
        init: Option<&ClusterAssignment>,
        seed: u64,
    ) -> Result<ClusterAssignment>;

    /// The cluster count this handle always produces, when it is fixed.
    fn fixed_k(&self) -> Option<usize> {
        None
    }
}

/// Agglomerative hierarchical clustering cut at a fixed k.
#[derive(Debug, Clone, Copy)]
pub struct HierarchicalClusterer {
    pub linkage: Linkage,
    pub k: usize,
}

impl StaticClusterer for HierarchicalClusterer {
    fn cluster(
        &self,
        matrix: &ProximityMatrix,
        _init: Option<&ClusterAssignment>,
        _seed: u64,
    ) -> Result<ClusterAssignment> {
        let dendrogram = hierarchical(matrix, self.linkage)?;
        cut(&dendrogram, self.k)
    }

    fn fixed_k(&self) -> Option<usize> {
        Some(self.k)
    }
}

/// Similarity-matrix k-means. A usable warm start competes against the
/// seeded random restarts and is kept on cost ties, so repeated calls stay
/// label-stable without getting trapped in a stale local optimum when the
/// data moves away from the warm start.
#[derive(Debug, Clone, Copy)]
pub struct KmeansClusterer {
    pub k: usize,
    pub restarts: usize,
}

impl KmeansClusterer {
    pub fn new(k: usize) -> Self {
        Self { k, restarts: 10 }
    }
}

impl StaticClusterer for KmeansClusterer {
    fn cluster(
        &self,
        matrix: &ProximityMatrix,
        init: Option<&ClusterAssignment>,
        seed: u64,
    ) -> Result<ClusterAssignment> {
        let mut best: Option<KmeansResult> = None;
        if let Some(a) = init {
            if a.ids() == matrix.ids() && a.k() <= self.k {
                best = Some(kmeans_similarity(matrix, self.k, KmeansInit::Assignment(a))?);
            }
        }
        for r in 0..self.restarts.max(1) {
            let result = kmeans_similarity(
                matrix,
                self.k,
                KmeansInit::Seed(derive_seed(seed, r as u64)),
            )?;
            if best.as_ref().is_none_or(|b| result.cost < b.cost) {
                best = Some(result);
            }
        }
        Ok(best.expect("at least one attempt").assignment)
    }

    fn fixed_k(&self) -> Option<usize> {
        Some(self.k)
    }
}

/// Spectral clustering, either at fixed k or with modularity selection.
#[derive(Debug, Clone, Copy)]
pub struct SpectralClusterer {
    pub variant: SpectralVariant,
    pub k: KSelection,
}

impl StaticClusterer for SpectralClusterer {
    fn cluster(
        &self,
        matrix: &ProximityMatrix,
        _init: Option<&ClusterAssignment>,
        seed: u64,
    ) -> Result<ClusterAssignment> {
        match self.k {
            KSelection::Fixed(k) => spectral(matrix, k, self.variant, seed),
            KSelection::Modularity { lo, hi } => {
                select_k_modularity(matrix, lo, hi, self.variant, seed)
            }
        }
    }

    fn fixed_k(&self) -> Option<usize> {
        match self.k {
            KSelection::Fixed(k) => Some(k),
            KSelection::Modularity { .. } => None,
        }
    }
}
