use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::Mat;
use crate::model::Plant;

use super::care::solve_care;
use super::lyapunov::{closed_loop_gramian, dual_value_matrix};

/// `J(K) = tr((Q + K'RK) X)` with `X` the closed-loop Gramian.
pub fn cost(plant: &Plant, k: &Mat) -> Result<f64> {
    let g = closed_loop_gramian(plant, k)?;
    Ok(((plant.q() + k.transpose() * plant.r() * k) * &g.x).trace())
}

/// `∇J(K) = 2 (RK + B'P) X`.
pub fn gradient(plant: &Plant, k: &Mat) -> Result<Mat> {
    let x = closed_loop_gramian(plant, k)?.x;
    let p = dual_value_matrix(plant, k)?.p;
    Ok((plant.r() * k + plant.b().transpose() * p) * x * 2.0)
}

/// Both sides of `J(K) - J(K*) = tr((K-K*)' R (K-K*) X)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostGap {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

pub fn cost_gap_identity(plant: &Plant, k: &Mat) -> Result<CostGap> {
    plant.check_gain(k)?;
    let k_star = solve_care(plant)?.k_star;
    let lhs = cost(plant, k)? - cost(plant, &k_star)?;
    let x = closed_loop_gramian(plant, k)?.x;
    let d = k - &k_star;
    let rhs = (d.transpose() * plant.r() * &d * x).trace();
    Ok(CostGap {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
    })
}
