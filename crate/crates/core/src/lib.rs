//! Continuous-time LQR: Lyapunov and Riccati solvers, the semidefinite
//! duality certificate, optimization-landscape diagnostics, and
//! trajectory-Gramian checks.

pub mod checks;
pub mod duality;
pub mod error;
pub mod gramian;
pub mod instances;
pub mod landscape;
pub mod linalg;
pub mod lyap_riccati;
pub mod model;
pub mod schur;
pub mod serde_matrix;
pub mod tolerances;

pub use duality::*;
pub use error::{LqrError, Result};
pub use gramian::*;
pub use landscape::*;
pub use linalg::{Mat, Vector};
pub use lyap_riccati::*;
pub use model::*;
pub use tolerances::Tolerances;
