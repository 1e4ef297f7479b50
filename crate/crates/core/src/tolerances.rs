//! Numerical thresholds shared by every module.
//!
//! All rank and definiteness decisions read from a [`Tolerances`] value so a
//! caller can tighten or loosen them in one place. The defaults are the values
//! the test suites are pinned against.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Absolute stability margin: a matrix is stable iff its spectral
    /// abscissa is below `-stability`.
    pub stability: f64,
    /// Relative singular-value threshold for structural rank tests.
    pub rank_rel: f64,
    /// Relative eigenvalue slack for semidefiniteness of plant data.
    pub psd_rel: f64,
    /// Relative residual bound for Lyapunov solutions.
    pub lyapunov_residual: f64,
    /// Relative residual bound for Riccati solutions.
    pub care_residual: f64,
    /// Hamiltonian eigenvalues closer than this (relative) to the imaginary
    /// axis make the Riccati problem ill-conditioned.
    pub hamiltonian_axis: f64,
    /// Relative singular-value threshold for complementarity ranks.
    pub complementarity_rank: f64,
    /// Relative slack on the minimum eigenvalue of the dual LMI.
    pub lmi_feasibility: f64,
    /// Relative threshold below which a lifted Gramian counts as singular.
    pub lift_singular: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        stability: 1e-9,
        rank_rel: 1e-9,
        psd_rel: 1e-10,
        lyapunov_residual: 1e-9,
        care_residual: 1e-8,
        hamiltonian_axis: 1e-8,
        complementarity_rank: 1e-7,
        lmi_feasibility: 1e-9,
        lift_singular: 1e-10,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}
