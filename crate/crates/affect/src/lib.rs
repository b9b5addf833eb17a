//! Adaptive evolutionary clustering over a stream of proximity matrices.
//!
//! At each time step the observed proximity matrix `W^t` is treated as a
//! noisy sample of an unknown true proximity matrix. The tracker keeps a
//! smoothed estimate via the recursion
//!
//! ```text
//! psi_hat^t = alpha^t * psi_hat^{t-1} + (1 - alpha^t) * W^t
//! ```
//!
//! where the forgetting factor `alpha^t` is re-estimated at every step from
//! block sample moments of `W^t` under the current clustering, so the
//! tracker forgets quickly when the data shifts and averages aggressively
//! when it does not. Any static clusterer can then run on the smoothed
//! matrix; hierarchical linkage, similarity k-means and three spectral
//! variants are provided, along with baselines, synthetic generators and an
//! experiment runner.

pub mod assignment;
pub mod baselines;
pub mod boids;
pub mod cluster;
pub mod error;
pub mod eval;
pub mod gmm;
pub mod io;
pub mod linalg;
pub mod proximity;
pub mod runner;
pub mod tracking;
pub(crate) mod util;

pub use assignment::ClusterAssignment;
pub use error::{Error, Result};
pub use proximity::{align_state, ObjectRegistry, ProximityKind, ProximityMatrix};
