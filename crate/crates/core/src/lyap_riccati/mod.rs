//! Continuous Lyapunov and algebraic Riccati solvers, the LQR cost, its
//! gradient, and the completion-of-squares cost gap.

mod care;
mod cost;
mod lyapunov;

pub use care::{
    newton_kleinman, optimal_gain, riccati_residual, solve_care, solve_care_with, stabilizing_gain,
    NewtonKleinman, RiccatiSolution,
};
pub use cost::{cost, cost_gap_identity, gradient, CostGap};
pub use lyapunov::{
    closed_loop_gramian, dual_value_matrix, solve_lyapunov, solve_lyapunov_with, GramianSolution,
    ValueMatrix,
};
