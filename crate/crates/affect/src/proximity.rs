//! Proximity matrices over an evolving object set.
//!
//! A proximity matrix is a square symmetric matrix of pairwise similarities
//! or dissimilarities, with one string id per row/column. Matrices observed
//! at successive time steps may cover different object sets; [`align_state`]
//! restricts a previous matrix to the objects still present so that the
//! smoothing recursion can continue over the shared part.

use std::collections::HashMap;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Symmetry and sign checks accept deviations up to this absolute tolerance.
pub const VALIDATION_TOL: f64 = 1e-9;

/// Whether larger entries mean closer objects (similarity) or farther ones
/// (dissimilarity).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProximityKind {
    Similarity,
    Dissimilarity,
}

impl ProximityKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProximityKind::Similarity => "similarity",
            ProximityKind::Dissimilarity => "dissimilarity",
        }
    }
}

/// A validated square symmetric proximity matrix with object ids.
#[derive(Debug, Clone)]
pub struct ProximityMatrix {
    kind: ProximityKind,
    values: Array2<f64>,
    ids: Vec<String>,
}

/// Checks the raw parts of a proximity matrix without building one.
///
/// Requires a square matrix matching the id count, unique ids, finite
/// entries and symmetry within [`VALIDATION_TOL`]. Dissimilarities must
/// additionally be nonnegative with a zero diagonal, both within tolerance.
pub fn validate(kind: ProximityKind, values: &Array2<f64>, ids: &[String]) -> Result<()> {
    let (rows, cols) = values.dim();
    if rows != cols || rows != ids.len() {
        return Err(Error::DimensionMismatch {
            rows,
            cols,
            expected: ids.len(),
        });
    }
    let mut seen = HashMap::with_capacity(ids.len());
    for id in ids {
        if seen.insert(id.as_str(), ()).is_some() {
            return Err(Error::DuplicateId(id.clone()));
        }
    }
    for i in 0..rows {
        for j in 0..cols {
            let v = values[[i, j]];
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry { i, j, value: v });
            }
        }
    }
    for i in 0..rows {
        for j in (i + 1)..cols {
            let delta = (values[[i, j]] - values[[j, i]]).abs();
            if delta > VALIDATION_TOL {
                return Err(Error::AsymmetricMatrix { i, j, delta });
            }
        }
    }
    if kind == ProximityKind::Dissimilarity {
        for i in 0..rows {
            let d = values[[i, i]];
            if d.abs() > VALIDATION_TOL {
                return Err(Error::NonzeroDiagonal { i, value: d });
            }
            for j in 0..cols {
                let v = values[[i, j]];
                if v < -VALIDATION_TOL {
                    return Err(Error::NegativeDissimilarity { i, j, value: v });
                }
            }
        }
    }
    Ok(())
}

impl ProximityMatrix {
    /// Validates the parts and builds a matrix, symmetrizing by averaging
    /// the two halves. Dissimilarity entries within tolerance of zero are
    /// clamped and the diagonal is set exactly to zero.
    pub fn new(kind: ProximityKind, mut values: Array2<f64>, ids: Vec<String>) -> Result<Self> {
        validate(kind, &values, &ids)?;
        let n = ids.len();
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (values[[i, j]] + values[[j, i]]);
                values[[i, j]] = avg;
                values[[j, i]] = avg;
            }
        }
        if kind == ProximityKind::Dissimilarity {
            values.mapv_inplace(|v| if v < 0.0 { 0.0 } else { v });
            for i in 0..n {
                values[[i, i]] = 0.0;
            }
        }
        Ok(Self { kind, values, ids })
    }

    /// Builds a matrix from parts already known to satisfy the invariants,
    /// such as the output of a smoothing update over validated inputs.
    pub(crate) fn from_valid_parts(
        kind: ProximityKind,
        values: Array2<f64>,
        ids: Vec<String>,
    ) -> Self {
        debug_assert!(validate(kind, &values, &ids).is_ok());
        Self { kind, values, ids }
    }

    /// Gram matrix of dot products between feature rows.
    pub fn dot_product_gram(features: &Array2<f64>, ids: Vec<String>) -> Result<Self> {
        let gram = features.dot(&features.t());
        Self::new(ProximityKind::Similarity, gram, ids)
    }

    /// Gaussian similarity exp(-||x_i - x_j||^2 / (2 rho^2)) between rows.
    pub fn gaussian_similarity(points: &Array2<f64>, rho: f64, ids: Vec<String>) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(Error::BadConfig(format!(
                "gaussian similarity scale must be positive, got {rho}"
            )));
        }
        let n = points.nrows();
        let mut values = Array2::zeros((n, n));
        for i in 0..n {
            values[[i, i]] = 1.0;
            for j in (i + 1)..n {
                let mut d2 = 0.0;
                for k in 0..points.ncols() {
                    let diff = points[[i, k]] - points[[j, k]];
                    d2 += diff * diff;
                }
                let s = (-d2 / (2.0 * rho * rho)).exp();
                values[[i, j]] = s;
                values[[j, i]] = s;
            }
        }
        Self::new(ProximityKind::Similarity, values, ids)
    }

    /// Euclidean distance matrix between rows, as a dissimilarity.
    pub fn euclidean_distances(points: &Array2<f64>, ids: Vec<String>) -> Result<Self> {
        let n = points.nrows();
        let mut values = Array2::zeros((n, n));
        for i in 0..n {
            for j in (i + 1)..n {
                let mut d2 = 0.0;
                for k in 0..points.ncols() {
                    let diff = points[[i, k]] - points[[j, k]];
                    d2 += diff * diff;
                }
                let d = d2.sqrt();
                values[[i, j]] = d;
                values[[j, i]] = d;
            }
        }
        Self::new(ProximityKind::Dissimilarity, values, ids)
    }

    pub fn kind(&self) -> ProximityKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Position of an id, if present.
    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    /// Submatrix over the given row/column indices, in the given order.
    pub fn restrict(&self, indices: &[usize]) -> Self {
        let m = indices.len();
        let mut values = Array2::zeros((m, m));
        for (a, &i) in indices.iter().enumerate() {
            for (b, &j) in indices.iter().enumerate() {
                values[[a, b]] = self.values[[i, j]];
            }
        }
        let ids = indices.iter().map(|&i| self.ids[i].clone()).collect();
        Self {
            kind: self.kind,
            values,
            ids,
        }
    }

    /// Median of the strictly upper-triangular entries. Used as a default
    /// length scale when building Gaussian similarities from positions.
    pub fn median_offdiagonal(&self) -> Option<f64> {
        let n = self.n();
        if n < 2 {
            return None;
        }
        let mut entries = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                entries.push(self.values[[i, j]]);
            }
        }
        entries.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Some(entries[entries.len() / 2])
    }
}

/// A previous matrix aligned to the object set of the current one.
#[derive(Debug, Clone)]
pub struct Alignment {
    /// Rows/columns of the previous matrix restricted to the ids shared
    /// with the current step, in the current step's order.
    pub prev_restricted: ProximityMatrix,
    /// Positions (in the current matrix) of the shared ids.
    pub shared_indices: Vec<usize>,
    /// Positions (in the current matrix) of ids absent from the previous
    /// step.
    pub new_indices: Vec<usize>,
    /// Ids absent from the previous step, in the current step's order.
    pub new_ids: Vec<String>,
}

/// Restricts the previous step's matrix to the objects still present and
/// reports which current objects are new.
///
/// Objects absent from the previous step carry no smoothing history; an id
/// that left and returned is treated as new. Fails with
/// [`Error::EmptyIntersection`] when no object is shared, in which case the
/// caller should restart smoothing from the current observation alone.
pub fn align_state(prev: &ProximityMatrix, current: &ProximityMatrix) -> Result<Alignment> {
    if prev.kind != current.kind {
        return Err(Error::KindMismatch {
            previous: prev.kind.as_str(),
            current: current.kind.as_str(),
        });
    }
    let prev_index: HashMap<&str, usize> = prev
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut shared_prev = Vec::new();
    let mut shared_indices = Vec::new();
    let mut new_indices = Vec::new();
    let mut new_ids = Vec::new();
    for (j, id) in current.ids.iter().enumerate() {
        match prev_index.get(id.as_str()) {
            Some(&i) => {
                shared_prev.push(i);
                shared_indices.push(j);
            }
            None => {
                new_indices.push(j);
                new_ids.push(id.clone());
            }
        }
    }
    if shared_indices.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    Ok(Alignment {
        prev_restricted: prev.restrict(&shared_prev),
        shared_indices,
        new_indices,
        new_ids,
    })
}

/// Tracks the set of objects seen so far with stable integer indices.
///
/// An object keeps its index for the lifetime of the registry; removal
/// deactivates it and a later add of the same id reactivates it. The
/// generation counter increments on every membership change, so consumers
/// can detect that the active set moved under them.
#[derive(Debug, Clone, Default)]
pub struct ObjectRegistry {
    ids: Vec<String>,
    active: Vec<bool>,
    index: HashMap<String, usize>,
    generation: u64,
}

impl ObjectRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds or reactivates an object and returns its stable index.
    pub fn add(&mut self, id: &str) -> Result<usize> {
        if let Some(&i) = self.index.get(id) {
            if self.active[i] {
                return Err(Error::DuplicateId(id.to_string()));
            }
            self.active[i] = true;
            self.generation += 1;
            return Ok(i);
        }
        let i = self.ids.len();
        self.ids.push(id.to_string());
        self.active.push(true);
        self.index.insert(id.to_string(), i);
        self.generation += 1;
        Ok(i)
    }

    /// Deactivates an object, keeping its index reserved.
    pub fn remove(&mut self, id: &str) -> Result<()> {
        match self.index.get(id) {
            Some(&i) if self.active[i] => {
                self.active[i] = false;
                self.generation += 1;
                Ok(())
            }
            _ => Err(Error::IdMismatch(format!("{id:?} is not active"))),
        }
    }

    /// Stable index of an id, active or not.
    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn is_active(&self, id: &str) -> bool {
        self.index_of(id).is_some_and(|i| self.active[i])
    }

    /// Active ids in insertion order.
    pub fn active_ids(&self) -> Vec<String> {
        self.ids
            .iter()
            .zip(&self.active)
            .filter(|(_, &a)| a)
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn ids(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn validate_accepts_a_distance_matrix() {
        let m = array![[0.0, 1.0], [1.0, 0.0]];
        assert!(validate(ProximityKind::Dissimilarity, &m, &ids(&["a", "b"])).is_ok());
    }

    #[test]
    fn validate_rejects_negative_dissimilarity() {
        let m = array![[0.0, -1.0], [-1.0, 0.0]];
        let err = validate(ProximityKind::Dissimilarity, &m, &ids(&["a", "b"])).unwrap_err();
        assert!(matches!(err, Error::NegativeDissimilarity { .. }));
    }

    #[test]
    fn validate_rejects_asymmetry_beyond_tolerance() {
        let m = array![[1.0, 0.5], [0.5 + 1e-6, 1.0]];
        let err = validate(ProximityKind::Similarity, &m, &ids(&["a", "b"])).unwrap_err();
        assert!(matches!(err, Error::AsymmetricMatrix { .. }));
    }

    #[test]
    fn validate_rejects_nonzero_dissimilarity_diagonal() {
        let m = array![[0.5, 1.0], [1.0, 0.0]];
        let err = validate(ProximityKind::Dissimilarity, &m, &ids(&["a", "b"])).unwrap_err();
        assert!(matches!(err, Error::NonzeroDiagonal { i: 0, .. }));
    }

    #[test]
    fn validate_rejects_duplicate_ids() {
        let m = array![[1.0, 0.0], [0.0, 1.0]];
        let err = validate(ProximityKind::Similarity, &m, &ids(&["a", "a"])).unwrap_err();
        assert!(matches!(err, Error::DuplicateId(_)));
    }

    #[test]
    fn validate_rejects_shape_mismatch() {
        let m = array![[1.0, 0.0], [0.0, 1.0]];
        let err = validate(ProximityKind::Similarity, &m, &ids(&["a", "b", "c"])).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn construction_symmetrizes_within_tolerance() {
        let m = array![[1.0, 0.5 + 4e-10], [0.5, 1.0]];
        let p = ProximityMatrix::new(ProximityKind::Similarity, m, ids(&["a", "b"])).unwrap();
        assert_eq!(p.values()[[0, 1]], p.values()[[1, 0]]);
        assert!((p.values()[[0, 1]] - (0.5 + 2e-10)).abs() < 1e-15);
    }

    #[test]
    fn construction_zeroes_dissimilarity_diagonal() {
        let m = array![[1e-10, 2.0], [2.0, -1e-10]];
        let p = ProximityMatrix::new(ProximityKind::Dissimilarity, m, ids(&["a", "b"])).unwrap();
        assert_eq!(p.values()[[0, 0]], 0.0);
        assert_eq!(p.values()[[1, 1]], 0.0);
    }

    #[test]
    fn gram_matrix_matches_manual_dot_products() {
        let x = array![[1.0, 2.0], [3.0, -1.0], [0.0, 0.5]];
        let p = ProximityMatrix::dot_product_gram(&x, ids(&["a", "b", "c"])).unwrap();
        assert!((p.values()[[0, 1]] - 1.0).abs() < 1e-12);
        assert!((p.values()[[0, 0]] - 5.0).abs() < 1e-12);
        assert!((p.values()[[2, 1]] - (-0.5)).abs() < 1e-12);
    }

    #[test]
    fn gaussian_similarity_has_unit_diagonal_and_decays() {
        let x = array![[0.0], [1.0], [10.0]];
        let p = ProximityMatrix::gaussian_similarity(&x, 1.0, ids(&["a", "b", "c"])).unwrap();
        assert_eq!(p.values()[[0, 0]], 1.0);
        assert!((p.values()[[0, 1]] - (-0.5f64).exp()).abs() < 1e-12);
        assert!(p.values()[[0, 2]] < 1e-20);
    }

    #[test]
    fn euclidean_distances_form_a_valid_dissimilarity() {
        let x = array![[0.0, 0.0], [3.0, 4.0]];
        let p = ProximityMatrix::euclidean_distances(&x, ids(&["a", "b"])).unwrap();
        assert_eq!(p.kind(), ProximityKind::Dissimilarity);
        assert!((p.values()[[0, 1]] - 5.0).abs() < 1e-12);
        assert_eq!(p.values()[[0, 0]], 0.0);
    }

    #[test]
    fn align_keeps_shared_ids_in_current_order() {
        let prev = ProximityMatrix::new(
            ProximityKind::Similarity,
            array![[1.0, 0.2, 0.3], [0.2, 1.0, 0.4], [0.3, 0.4, 1.0]],
            ids(&["a", "b", "c"]),
        )
        .unwrap();
        let cur = ProximityMatrix::new(
            ProximityKind::Similarity,
            array![[1.0, 0.5, 0.6], [0.5, 1.0, 0.7], [0.6, 0.7, 1.0]],
            ids(&["c", "b", "d"]),
        )
        .unwrap();
        let a = align_state(&prev, &cur).unwrap();
        assert_eq!(a.prev_restricted.ids(), &ids(&["c", "b"])[..]);
        assert_eq!(a.prev_restricted.values()[[0, 1]], 0.4);
        assert_eq!(a.new_ids, ids(&["d"]));
        assert_eq!(a.shared_indices, vec![0, 1]);
        assert_eq!(a.new_indices, vec![2]);
    }

    #[test]
    fn align_fails_on_disjoint_id_sets() {
        let prev = ProximityMatrix::new(
            ProximityKind::Similarity,
            array![[1.0, 0.2], [0.2, 1.0]],
            ids(&["a", "b"]),
        )
        .unwrap();
        let cur = ProximityMatrix::new(
            ProximityKind::Similarity,
            array![[1.0, 0.5], [0.5, 1.0]],
            ids(&["c", "d"]),
        )
        .unwrap();
        assert!(matches!(
            align_state(&prev, &cur),
            Err(Error::EmptyIntersection)
        ));
    }

    #[test]
    fn align_rejects_mixed_kinds() {
        let prev = ProximityMatrix::new(
            ProximityKind::Similarity,
            array![[1.0, 0.2], [0.2, 1.0]],
            ids(&["a", "b"]),
        )
        .unwrap();
        let cur = ProximityMatrix::new(
            ProximityKind::Dissimilarity,
            array![[0.0, 0.5], [0.5, 0.0]],
            ids(&["a", "b"]),
        )
        .unwrap();
        assert!(matches!(
            align_state(&prev, &cur),
            Err(Error::KindMismatch { .. })
        ));
    }

    #[test]
    fn registry_reactivates_returning_ids_with_stable_index() {
        let mut reg = ObjectRegistry::new();
        assert_eq!(reg.add("a").unwrap(), 0);
        assert_eq!(reg.add("b").unwrap(), 1);
        assert!(reg.add("a").is_err());
        reg.remove("a").unwrap();
        assert!(!reg.is_active("a"));
        assert_eq!(reg.active_ids(), ids(&["b"]));
        assert_eq!(reg.add("a").unwrap(), 0);
        assert_eq!(reg.active_ids(), ids(&["a", "b"]));
        assert_eq!(reg.active_count(), 2);
    }

    #[test]
    fn registry_remove_of_unknown_id_fails() {
        let mut reg = ObjectRegistry::new();
        reg.add("a").unwrap();
        assert!(reg.remove("zzz").is_err());
        assert_eq!(reg.generation(), 1);
    }
}
