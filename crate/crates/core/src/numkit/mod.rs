//! Dense linear algebra, stable reductions, seeded randomness and the
//! reverse-mode gradient tape used by flow training.

pub mod linalg;
pub mod matrix;
pub mod rng;
pub mod stable;
pub mod tape;

pub use linalg::{cholesky, log_det_cholesky, mahalanobis_sq, solve_lower};
pub use matrix::{dot, Matrix};
pub use rng::{sample_standard_normal, Rng};
pub use stable::{logsumexp, mean, pairwise_sum};
pub use tape::{GradTape, Gradients, NodeId};
