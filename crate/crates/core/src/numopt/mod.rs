//! First-order minimization, finite-difference checks, and non-negative
//! least squares.

mod adam;
mod fd;
mod nnls;

pub use adam::{minimize, Objective, ObjectiveReport, Schedule, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use fd::{finite_diff_gradient, max_relative_error};
pub use nnls::{nnls, nnls_kkt_violation, NnlsResult};
