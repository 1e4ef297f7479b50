//! Primal covariance lift, dual LMI, and the certificates tying them
//! together: strong duality, complementary slackness, strict complementarity.

use serde::{Deserialize, Serialize};

use crate::error::{LqrError, Result};
use crate::linalg::{block2, frobenius_inner, lambda_max, lambda_min, rank, sym, Mat};
use crate::lyap_riccati::{
    closed_loop_gramian, cost, solve_care_with, solve_lyapunov_with, RiccatiSolution,
};
use crate::model::Plant;
use crate::serde_matrix;
use crate::tolerances::Tolerances;

/// Relative singular-value threshold for rank decisions.
pub const SV_THRESHOLD: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    #[serde(rename = "P", with = "serde_matrix")]
    pub p: Mat,
    pub dual_value: f64,
    pub lmi_min_eig: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalLift {
    #[serde(rename = "Z", with = "serde_matrix")]
    pub z: Mat,
    #[serde(rename = "Z11", with = "serde_matrix")]
    pub z11: Mat,
    #[serde(rename = "Z12", with = "serde_matrix")]
    pub z12: Mat,
    #[serde(rename = "Z22", with = "serde_matrix")]
    pub z22: Mat,
    pub objective: f64,
    pub affine_residual: f64,
}

impl PrimalLift {
    fn assemble(plant: &Plant, z11: Mat, z12: Mat, z22: Mat) -> Self {
        let z = sym(&block2(&z11, &z12, &z12.transpose(), &z22));
        let objective = (plant.q() * &z11).trace() + (plant.r() * &z22).trace();
        let affine_residual = affine_residual(plant, &z11, &z12);
        Self {
            z,
            z11,
            z12,
            z22,
            objective,
            affine_residual,
        }
    }

    pub fn rank(&self) -> usize {
        rank(&self.z, SV_THRESHOLD)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplementarityReport {
    #[serde(rename = "rank_M")]
    pub rank_m: usize,
    #[serde(rename = "rank_Z")]
    pub rank_z: usize,
    pub rank_sum: usize,
    pub slackness: f64,
    pub strict: bool,
    pub sv_threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualityGap {
    pub p_star: f64,
    pub d_star: f64,
    pub gap: f64,
}

/// Everything `certify` emits for one plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateBundle {
    pub riccati: RiccatiSolution,
    pub dual: DualCertificate,
    pub primal: PrimalLift,
    pub duality_gap: DualityGap,
    pub complementarity: ComplementarityReport,
}

/// `A Z11 + B Z12' + Z11 A' + Z12 B' + W` in Frobenius norm.
fn affine_residual(plant: &Plant, z11: &Mat, z12: &Mat) -> f64 {
    let t = plant.a() * z11 + plant.b() * z12.transpose();
    (&t + t.transpose() + plant.w()).norm()
}

fn check_symmetric(p: &Mat, n: usize) -> Result<()> {
    if p.shape() != (n, n) {
        return Err(LqrError::Dimension(format!(
            "P must be {n}x{n}, got {}x{}",
            p.nrows(),
            p.ncols()
        )));
    }
    if (p - p.transpose()).norm() > 1e-9 * (1.0 + p.norm()) {
        return Err(LqrError::InvalidInput("P is not symmetric".into()));
    }
    Ok(())
}

/// `M(P) = [[A'P + PA + Q, PB], [B'P, R]]`.
pub fn lmi_matrix(plant: &Plant, p: &Mat) -> Result<Mat> {
    check_symmetric(p, plant.n())?;
    let p = sym(p);
    let top = plant.a().transpose() * &p + &p * plant.a() + plant.q();
    let pb = &p * plant.b();
    Ok(sym(&block2(&top, &pb, &pb.transpose(), plant.r())))
}

pub fn dual_certificate(plant: &Plant, p: &Mat) -> Result<DualCertificate> {
    dual_certificate_with(plant, p, &Tolerances::DEFAULT)
}

pub fn dual_certificate_with(plant: &Plant, p: &Mat, tol: &Tolerances) -> Result<DualCertificate> {
    let m = lmi_matrix(plant, p)?;
    let lmi_min_eig = lambda_min(&m);
    let feasible = lmi_min_eig >= -tol.lmi_feasibility * (1.0 + lambda_max(&m));
    Ok(DualCertificate {
        p: sym(p),
        dual_value: (plant.w() * p).trace(),
        lmi_min_eig,
        feasible,
    })
}

/// `Z11 = X`, `Z12 = X K'`, `Z22 = K X K'` for the closed-loop Gramian `X`.
pub fn lift_primal(plant: &Plant, k: &Mat) -> Result<PrimalLift> {
    let x = closed_loop_gramian(plant, k)?.x;
    let z12 = &x * k.transpose();
    let z22 = sym(&(k * &z12));
    Ok(PrimalLift::assemble(plant, x, z12, z22))
}

/// Primal optimum recovered from the KKT system at `P*`.
pub fn kkt_primal_from_dual(plant: &Plant, p_star: &Mat) -> Result<PrimalLift> {
    kkt_primal_from_dual_with(plant, p_star, &Tolerances::DEFAULT)
}

pub fn kkt_primal_from_dual_with(
    plant: &Plant,
    p_star: &Mat,
    tol: &Tolerances,
) -> Result<PrimalLift> {
    check_symmetric(p_star, plant.n())?;
    // R^{-1} B' P*
    let gain = plant.r_inv_bt()? * p_star;
    let f = plant.a() - plant.b() * &gain;
    let z11 = solve_lyapunov_with(&f, plant.w(), tol)?;
    let z12 = -(&z11 * gain.transpose());
    let z22 = sym(&(&gain * &z11 * gain.transpose()));
    let lift = PrimalLift::assemble(plant, z11, z12, z22);
    if lift.affine_residual > 1e-8 * (1.0 + lift.z.norm()) {
        return Err(LqrError::Numerical(format!(
            "KKT primal violates the affine constraint (residual {:.3e})",
            lift.affine_residual
        )));
    }
    Ok(lift)
}

/// `(J(K*), tr(W P*), J(K*) - tr(W P*))`.
pub fn duality_gap(plant: &Plant) -> Result<DualityGap> {
    duality_gap_from(plant, &solve_care_with(plant, &Tolerances::DEFAULT)?)
}

pub fn duality_gap_from(plant: &Plant, sol: &RiccatiSolution) -> Result<DualityGap> {
    let p_star = cost(plant, &sol.k_star)?;
    let d_star = (plant.w() * &sol.p_star).trace();
    Ok(DualityGap {
        p_star,
        d_star,
        gap: p_star - d_star,
    })
}

pub fn complementarity(plant: &Plant, p_star: &Mat, z_star: &Mat) -> Result<ComplementarityReport> {
    let dim = plant.n() + plant.m();
    if z_star.shape() != (dim, dim) {
        return Err(LqrError::Dimension(format!("Z must be {dim}x{dim}")));
    }
    let m = lmi_matrix(plant, p_star)?;
    let rank_m = rank(&m, SV_THRESHOLD);
    let rank_z = rank(z_star, SV_THRESHOLD);
    let rank_sum = rank_m + rank_z;
    Ok(ComplementarityReport {
        rank_m,
        rank_z,
        rank_sum,
        slackness: frobenius_inner(z_star, &m),
        strict: rank_sum == dim,
        sv_threshold: SV_THRESHOLD,
    })
}

/// Slackness tolerance `1e-7 (1 + ‖Z‖‖M‖)`.
pub fn slackness_tolerance(z: &Mat, m: &Mat) -> f64 {
    1e-7 * (1.0 + z.norm() * m.norm())
}

pub fn certify(plant: &Plant) -> Result<CertificateBundle> {
    certify_with(plant, &Tolerances::DEFAULT)
}

pub fn certify_with(plant: &Plant, tol: &Tolerances) -> Result<CertificateBundle> {
    let riccati = solve_care_with(plant, tol)?;
    let dual = dual_certificate_with(plant, &riccati.p_star, tol)?;
    let primal = kkt_primal_from_dual_with(plant, &riccati.p_star, tol)?;
    let duality_gap = duality_gap_from(plant, &riccati)?;
    let complementarity = complementarity(plant, &riccati.p_star, &primal.z)?;
    Ok(CertificateBundle {
        riccati,
        dual,
        primal,
        duality_gap,
        complementarity,
    })
}
