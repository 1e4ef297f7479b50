use serde::{Deserialize, Serialize};

use crate::error::{LqrError, Result};
use crate::linalg::{
    block2, lambda_max, lambda_min, solve_lu, spectral_abscissa, spectral_norm, sym, Mat,
};
use crate::model::{structural_report_with, Plant};
use crate::schur::RealSchur;
use crate::serde_matrix;
use crate::tolerances::Tolerances;

use super::lyapunov::solve_lyapunov_with;

/// Stabilizing solution of `A'P + PA - P B R^{-1} B' P + Q = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiccatiSolution {
    #[serde(rename = "P_star", with = "serde_matrix")]
    pub p_star: Mat,
    #[serde(rename = "K_star", with = "serde_matrix")]
    pub k_star: Mat,
    pub are_residual: f64,
    pub closed_loop_abscissa: f64,
}

/// `A'P + PA - P B R^{-1} B' P + Q`.
pub fn riccati_residual(plant: &Plant, p: &Mat) -> Result<Mat> {
    let g = plant.b() * plant.r_inv_bt()?;
    Ok(plant.a().transpose() * p + p * plant.a() - p * g * p + plant.q())
}

/// `K = -R^{-1} B' P`.
pub fn optimal_gain(plant: &Plant, p_star: &Mat) -> Result<Mat> {
    if p_star.shape() != (plant.n(), plant.n()) {
        return Err(LqrError::Dimension(format!("P must be {0}x{0}", plant.n())));
    }
    Ok(-(plant.r_inv_bt()? * p_star))
}

pub fn solve_care(plant: &Plant) -> Result<RiccatiSolution> {
    solve_care_with(plant, &Tolerances::DEFAULT)
}

/// Schur method: the stable invariant subspace `[U11; U21]` of the
/// Hamiltonian `[[A, -BR^{-1}B'], [-Q, -A']]` gives `P = U21 U11^{-1}`.
pub fn solve_care_with(plant: &Plant, tol: &Tolerances) -> Result<RiccatiSolution> {
    let report = structural_report_with(plant, None, tol)?;
    if !report.assumption1_holds {
        let mut why = Vec::new();
        if !report.stabilizable {
            why.push("(A, B) is not stabilizable");
        }
        if !report.detectable {
            why.push("(Q^1/2, A) is not detectable");
        }
        return Err(LqrError::Assumption(why.join("; ")));
    }
    let n = plant.n();
    let a = plant.a();
    let g = plant.b() * plant.r_inv_bt()?;
    let h = block2(a, &(-&g), &(-plant.q()), &(-a.transpose()));

    let mut schur = RealSchur::new(&h)?;
    let axis = tol.hamiltonian_axis * (1.0 + h.norm());
    if let Some(z) = schur.eigenvalues().iter().find(|z| z.re.abs() <= axis) {
        return Err(LqrError::IllConditioned(format!(
            "Hamiltonian eigenvalue {:.3e}{:+.3e}i lies on the imaginary axis",
            z.re, z.im
        )));
    }
    let stable_dim = schur.reorder(|z| z.re < 0.0)?;
    if stable_dim != n {
        return Err(LqrError::IllConditioned(format!(
            "stable invariant subspace has dimension {stable_dim}, expected {n}"
        )));
    }
    let u11 = schur.u.view((0, 0), (n, n)).clone_owned();
    let u21 = schur.u.view((n, 0), (n, n)).clone_owned();
    // P U11 = U21  <=>  U11' P' = U21'
    let p = sym(&solve_lu(&u11.transpose(), &u21.transpose())
        .map_err(|_| LqrError::IllConditioned("stable subspace basis U11 is singular".into()))?
        .transpose());

    let k = optimal_gain(plant, &p)?;
    let are_residual = riccati_residual(plant, &p)?.norm();
    let closed_loop_abscissa = spectral_abscissa(&(a + plant.b() * &k))?;
    if are_residual > tol.care_residual * (1.0 + p.norm()) {
        return Err(LqrError::Numerical(format!(
            "Riccati residual {are_residual:.3e} is too large"
        )));
    }
    if closed_loop_abscissa >= 0.0 {
        return Err(LqrError::Numerical(format!(
            "Riccati solution is not stabilizing (abscissa {closed_loop_abscissa:.3e})"
        )));
    }
    if lambda_min(&p) < -1e-9 * (1.0 + lambda_max(&p).abs()) {
        return Err(LqrError::Numerical(
            "Riccati solution is not positive semidefinite".into(),
        ));
    }
    Ok(RiccatiSolution {
        p_star: p,
        k_star: k,
        are_residual,
        closed_loop_abscissa,
    })
}

/// A stabilizing gain: zero if `A` is already stable, otherwise Bass's
/// construction `K = -B' Z^{-1}` with `(A+βI) Z + Z (A+βI)' = 2 B B'`.
/// The latter requires `(A, B)` controllable.
pub fn stabilizing_gain(plant: &Plant) -> Result<Mat> {
    let tol = Tolerances::DEFAULT;
    let (n, m) = (plant.n(), plant.m());
    if spectral_abscissa(plant.a())? < -tol.stability {
        return Ok(Mat::zeros(m, n));
    }
    let beta = spectral_norm(plant.a()) + 1.0;
    let shifted = -(plant.a() + Mat::identity(n, n) * beta);
    let z = solve_lyapunov_with(&shifted, &(plant.b() * plant.b().transpose() * 2.0), &tol)?;
    let k = -(plant.b().transpose()
        * z.clone().try_inverse().ok_or_else(|| {
            LqrError::Numerical("Bass Gramian is singular; (A, B) not controllable".into())
        })?);
    let abscissa = spectral_abscissa(&(plant.a() + plant.b() * &k))?;
    if abscissa >= -tol.stability {
        return Err(LqrError::Numerical(format!(
            "Bass gain failed to stabilize (abscissa {abscissa:.3e})"
        )));
    }
    Ok(k)
}

#[derive(Debug, Clone)]
pub struct NewtonKleinman {
    pub p: Mat,
    pub k: Mat,
    pub iterations: usize,
}

/// Kleinman's iteration: policy evaluation by a Lyapunov solve, then policy
/// improvement `K <- -R^{-1} B' P`, from a stabilizing `k0`.
pub fn newton_kleinman(
    plant: &Plant,
    k0: &Mat,
    max_iter: usize,
    rel_tol: f64,
) -> Result<NewtonKleinman> {
    plant.check_gain(k0)?;
    let tol = Tolerances::DEFAULT;
    let rb = plant.r_inv_bt()?;
    let mut k = k0.clone();
    let mut prev: Option<Mat> = None;
    for it in 1..=max_iter {
        let f = plant.closed_loop(&k)?;
        let s = plant.q() + k.transpose() * plant.r() * &k;
        let p = solve_lyapunov_with(&f.transpose(), &s, &tol)?;
        k = -(&rb * &p);
        if let Some(old) = &prev {
            if (&p - old).norm() <= rel_tol * (1.0 + p.norm()) {
                return Ok(NewtonKleinman {
                    p,
                    k,
                    iterations: it,
                });
            }
        }
        prev = Some(p);
    }
    Err(LqrError::Numerical(format!(
        "Newton-Kleinman did not converge in {max_iter} iterations"
    )))
}
