//! Stochastic max-plus and topical dynamics `x(n) = A(n) x(n-1)`.
//!
//! * [`maxplus`]: semiring scalars, matrices, projective space.
//! * [`spectral`]: maximal circuit mean, critical graph, cyclicity.
//! * [`stochastic`]: operator laws, trajectories, coupling, exact sampling of
//!   the invariant measure.
//! * [`semigroup`]: finite-support semigroup exploration and certificates.
//! * [`limit`]: Monte Carlo estimators for the limit theorems.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod limit;
pub mod maxplus;
pub mod semigroup;
pub mod spectral;
pub mod stats;
pub mod stochastic;

pub use error::{Error, Result};
