//! Optimizers and gradient verification shared by the estimators.

mod adam;
mod gradcheck;
mod linalg;
mod simplex;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{check_gradient, finite_diff_gradient};
pub use linalg::least_squares;
pub use simplex::{minimize_simplex, minimize_simplex_restarted, OptimResult, SimplexOptions};
