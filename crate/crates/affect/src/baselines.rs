//! Reference methods the adaptive tracker is compared against.
//!
//! All three share the same shape: feed one observation per step, get back
//! the matrix that should be handed to a static clusterer.
//!
//! * [`BaselineKind::Static`] clusters each observation as it arrives.
//! * [`BaselineKind::ConstantAlpha`] runs the usual smoothing recursion but
//!   with a fixed factor instead of an estimated one.
//! * [`BaselineKind::Pcq`] blends only the two most recent observations,
//!   `alpha * W^{t-1} + (1 - alpha) * W^t`, which is the preserving-cluster-
//!   quality scheme from evolutionary spectral clustering. Its memory is one
//!   step deep: the raw previous observation is kept, not the running blend.

use crate::assignment::ClusterAssignment;
use crate::cluster::StaticClusterer;
use crate::error::{Error, Result};
use crate::proximity::{align_state, ProximityMatrix};
use crate::tracking::{merge_with_new, smooth_update};
use crate::util::derive_seed;

/// Which comparison method a [`BaselineTracker`] implements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaselineKind {
    /// Cluster every observation directly, with no memory.
    Static,
    /// Exponential smoothing with a fixed forgetting factor.
    ConstantAlpha(f64),
    /// Convex blend of the current and previous observation only.
    Pcq(f64),
}

impl BaselineKind {
    /// The blend factor the method applies, when it has one.
    pub fn alpha(&self) -> Option<f64> {
        match self {
            BaselineKind::Static => None,
            BaselineKind::ConstantAlpha(a) | BaselineKind::Pcq(a) => Some(*a),
        }
    }

    /// Short label used in report tables.
    pub fn label(&self) -> String {
        match self {
            BaselineKind::Static => "static".to_string(),
            BaselineKind::ConstantAlpha(a) => format!("constant:{a}"),
            BaselineKind::Pcq(a) => format!("pcq:{a}"),
        }
    }
}

/// Streaming state for one baseline method.
#[derive(Debug, Clone)]
pub struct BaselineTracker {
    kind: BaselineKind,
    /// Running blend, kept only by the constant-factor recursion.
    smoothed: Option<ProximityMatrix>,
    /// Raw previous observation, kept only by the two-observation blend.
    previous: Option<ProximityMatrix>,
}

impl BaselineTracker {
    pub fn new(kind: BaselineKind) -> Result<Self> {
        if let Some(alpha) = kind.alpha() {
            if !(0.0..=1.0).contains(&alpha) || !alpha.is_finite() {
                return Err(Error::AlphaOutOfRange(alpha));
            }
        }
        Ok(Self {
            kind,
            smoothed: None,
            previous: None,
        })
    }

    pub fn kind(&self) -> &BaselineKind {
        &self.kind
    }

    /// Drops all history, so the next observation starts a fresh sequence.
    pub fn reset(&mut self) {
        self.smoothed = None;
        self.previous = None;
    }

    /// Feeds the next observation and returns the matrix to cluster.
    ///
    /// Fails with [`Error::EmptyIntersection`] when no object survives from
    /// the remembered state; callers that want to continue should [`reset`]
    /// and feed the observation again.
    ///
    /// [`reset`]: BaselineTracker::reset
    pub fn step(&mut self, current: &ProximityMatrix) -> Result<ProximityMatrix> {
        match self.kind {
            BaselineKind::Static => Ok(current.clone()),
            BaselineKind::ConstantAlpha(alpha) => {
                let next = match &self.smoothed {
                    None => current.clone(),
                    Some(prev) => blend_aligned(prev, current, alpha)?,
                };
                self.smoothed = Some(next.clone());
                Ok(next)
            }
            BaselineKind::Pcq(alpha) => {
                let blended = match &self.previous {
                    None => current.clone(),
                    Some(prev) => blend_aligned(prev, current, alpha)?,
                };
                self.previous = Some(current.clone());
                Ok(blended)
            }
        }
    }
}

/// `alpha * prev + (1 - alpha) * current` over the shared objects, raw
/// entries wherever a new object is involved. Objects that disappeared are
/// dropped with their history.
fn blend_aligned(
    prev: &ProximityMatrix,
    current: &ProximityMatrix,
    alpha: f64,
) -> Result<ProximityMatrix> {
    let alignment = align_state(prev, current)?;
    let current_shared = current.restrict(&alignment.shared_indices);
    let core = smooth_update(&alignment.prev_restricted, &current_shared, alpha)?;
    Ok(merge_with_new(&core, current, &alignment))
}

/// Everything produced by replaying one method over a whole sequence.
#[derive(Debug, Clone)]
pub struct BaselineRun {
    /// One assignment per step.
    pub assignments: Vec<ClusterAssignment>,
    /// The matrix each step's clustering actually ran on.
    pub smoothed: Vec<ProximityMatrix>,
}

/// Replays a baseline over a full observation sequence.
///
/// Every step clusters from scratch (no warm starts), so the static variant
/// is exactly "cluster each observation independently". The per-step seed is
/// derived from `seed` and the step index. If the remembered state shares no
/// objects with a new observation, the tracker restarts from that
/// observation instead of failing.
pub fn run_baseline(
    kind: BaselineKind,
    sequence: &[ProximityMatrix],
    clusterer: &dyn StaticClusterer,
    seed: u64,
) -> Result<BaselineRun> {
    let mut tracker = BaselineTracker::new(kind)?;
    let mut assignments = Vec::with_capacity(sequence.len());
    let mut smoothed = Vec::with_capacity(sequence.len());
    for (t, observation) in sequence.iter().enumerate() {
        let matrix = match tracker.step(observation) {
            Err(Error::EmptyIntersection) => {
                tracker.reset();
                tracker.step(observation)?
            }
            other => other?,
        };
        let assignment = clusterer.cluster(&matrix, None, derive_seed(seed, t as u64))?;
        assignments.push(assignment);
        smoothed.push(matrix);
    }
    Ok(BaselineRun {
        assignments,
        smoothed,
    })
}
