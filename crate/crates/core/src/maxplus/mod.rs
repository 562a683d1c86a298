//! Exact max-plus algebra: scalars, square matrices, operator action and the
//! projective quotient `PR^d_max`.

mod format;
mod matrix;
mod projective;
mod scalar;

pub use format::{format_matrix, parse_matrix, parse_matrix_at};
pub use matrix::{EntryKey, MpMatrix, DEFAULT_TOL};
pub use projective::{
    cocycle_xi, proj_metric, proj_norm, project, psi, psi_inv, vec_metric, ProjVec,
    TopicalFunctional,
};
pub use scalar::MaxPlus;

pub(crate) use projective::project_unchecked;
pub(crate) use scalar::rational_gcd;
