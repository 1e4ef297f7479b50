use serde::{Deserialize, Serialize};

use crate::error::{LqrError, Result};
use crate::linalg::{lambda_max, lambda_min, solve_spd, sym, Mat, Vector};
use crate::lyap_riccati::closed_loop_gramian;
use crate::model::Plant;
use crate::serde_matrix;
use crate::tolerances::Tolerances;

/// A gain together with its lifted coordinates `(Y, X)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ECLPoint {
    #[serde(rename = "K", with = "serde_matrix")]
    pub k: Mat,
    #[serde(rename = "X", with = "serde_matrix")]
    pub x: Mat,
    #[serde(rename = "Y", with = "serde_matrix")]
    pub y: Mat,
    pub gamma: f64,
    pub fcvx: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchyDirection {
    #[serde(with = "serde_matrix::vector")]
    pub g_c: Vector,
    pub lower_bound: f64,
    pub norm: f64,
}

fn check_lift(x: &Mat, tol: &Tolerances) -> Result<()> {
    let lo = lambda_min(x);
    if lo <= tol.lift_singular * (1.0 + lambda_max(x).abs()) {
        return Err(LqrError::SingularLift { lambda_min: lo });
    }
    Ok(())
}

/// `Q* = Q + K*' R K*`.
pub fn q_star(plant: &Plant, k_star: &Mat) -> Mat {
    sym(&(plant.q() + k_star.transpose() * plant.r() * k_star))
}

/// `Ψ(K, X) = ((K - K*) X, X)` with `X` the closed-loop Gramian of `K`.
pub fn ecl_forward(plant: &Plant, k: &Mat, k_star: &Mat) -> Result<ECLPoint> {
    plant.check_gain(k_star)?;
    let g = closed_loop_gramian(plant, k)?;
    check_lift(&g.x, &Tolerances::DEFAULT)?;
    let y = (k - k_star) * &g.x;
    let gamma = ((plant.q() + k.transpose() * plant.r() * k) * &g.x).trace();
    let fcvx = f_cvx_eval(plant, &y, &g.x, k_star)?;
    Ok(ECLPoint {
        k: k.clone(),
        x: g.x,
        y,
        gamma,
        fcvx,
    })
}

/// `K = Y X^{-1} + K*`.
pub fn ecl_inverse(y: &Mat, x: &Mat, k_star: &Mat) -> Result<Mat> {
    if x.nrows() != x.ncols() || y.ncols() != x.nrows() || k_star.shape() != y.shape() {
        return Err(LqrError::Dimension(
            "ecl_inverse needs Y: m x n, X: n x n, K*: m x n".into(),
        ));
    }
    check_lift(x, &Tolerances::DEFAULT)?;
    // X symmetric: Y X^{-1} = (X^{-1} Y')'
    Ok(solve_spd(x, &y.transpose())?.transpose() + k_star)
}

/// `X^{-1} Y'`, shared by the lifted objective and its gradient.
fn x_inv_yt(y: &Mat, x: &Mat) -> Result<Mat> {
    check_lift(x, &Tolerances::DEFAULT)?;
    solve_spd(x, &y.transpose())
}

fn check_lift_dims(plant: &Plant, y: &Mat, x: &Mat, k_star: &Mat) -> Result<()> {
    let (m, n) = (plant.m(), plant.n());
    if y.shape() != (m, n) || x.shape() != (n, n) || k_star.shape() != (m, n) {
        return Err(LqrError::Dimension(format!(
            "lifted point must be Y: {m}x{n}, X: {n}x{n}"
        )));
    }
    Ok(())
}

/// `f(Y, X) = tr(Q* X + X^{-1} Y' R Y + K*' R Y + Y' R K*)`.
pub fn f_cvx_eval(plant: &Plant, y: &Mat, x: &Mat, k_star: &Mat) -> Result<f64> {
    check_lift_dims(plant, y, x, k_star)?;
    let xiy = x_inv_yt(y, x)?;
    let r = plant.r();
    Ok((q_star(plant, k_star) * x).trace()
        + (xiy * r * y).trace()
        + 2.0 * (k_star.transpose() * r * y).trace())
}

/// `(∂f/∂Y, ∂f/∂X) = (2 R Y X^{-1} + 2 R K*, Q* - X^{-1} Y' R Y X^{-1})`.
pub fn f_cvx_grad(plant: &Plant, y: &Mat, x: &Mat, k_star: &Mat) -> Result<(Mat, Mat)> {
    check_lift_dims(plant, y, x, k_star)?;
    let xiy = x_inv_yt(y, x)?;
    let r = plant.r();
    let gy = (r * xiy.transpose() + r * k_star) * 2.0;
    let gx = sym(&(q_star(plant, k_star) - &xiy * r * xiy.transpose()));
    Ok((gy, gx))
}

/// Frobenius norm of `(A + BK*) X + X (A + BK*)' + BY + Y'B' + W`.
pub fn lifted_constraint_residual(plant: &Plant, y: &Mat, x: &Mat, k_star: &Mat) -> Result<f64> {
    check_lift_dims(plant, y, x, k_star)?;
    let f = plant.closed_loop(k_star)?;
    let by = plant.b() * y;
    Ok((&f * x + x * f.transpose() + &by + by.transpose() + plant.w()).norm())
}

/// Stack `(Y, X)` into one coordinate vector, column-major.
pub fn lift_coordinates(y: &Mat, x: &Mat) -> Vector {
    Vector::from_iterator(y.len() + x.len(), y.iter().chain(x.iter()).copied())
}

/// `g_c = <∇h(ζ), u> u` with `u = (ζ - ζ*)/‖ζ - ζ*‖`; `h_gap = h(ζ) - h(ζ*)`
/// sets the reference bound. Zero when `ζ = ζ*`.
pub fn cauchy_direction(
    grad: &Vector,
    zeta: &Vector,
    zeta_star: &Vector,
    h_gap: f64,
) -> Result<CauchyDirection> {
    if grad.len() != zeta.len() || zeta.len() != zeta_star.len() {
        return Err(LqrError::Dimension(
            "gradient and points must have equal length".into(),
        ));
    }
    let d = zeta - zeta_star;
    let dist = d.norm();
    if dist == 0.0 {
        return Ok(CauchyDirection {
            g_c: Vector::zeros(grad.len()),
            lower_bound: 0.0,
            norm: 0.0,
        });
    }
    let u = d / dist;
    let g_c = &u * grad.dot(&u);
    let norm = g_c.norm();
    Ok(CauchyDirection {
        g_c,
        lower_bound: h_gap / dist,
        norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    use crate::instances;

    fn s(v: f64) -> Mat {
        Mat::from_element(1, 1, v)
    }

    #[test]
    fn single_integrator_lift() {
        let p = instances::single_integrator().plant;
        let pt = ecl_forward(&p, &s(-2.0), &s(-1.0)).unwrap();
        assert_relative_eq!(pt.x[(0, 0)], 0.5, epsilon = 1e-14);
        assert_relative_eq!(pt.y[(0, 0)], -0.5, epsilon = 1e-14);
        assert_relative_eq!(pt.fcvx, 2.5, epsilon = 1e-12);
        assert_relative_eq!(
            ecl_inverse(&pt.y, &pt.x, &s(-1.0)).unwrap()[(0, 0)],
            -2.0,
            epsilon = 1e-14
        );
        let opt = ecl_forward(&p, &s(-1.0), &s(-1.0)).unwrap();
        assert_eq!(opt.y[(0, 0)], 0.0);
        assert_relative_eq!(opt.fcvx, 2.0, epsilon = 1e-12);
        assert!(lifted_constraint_residual(&p, &pt.y, &pt.x, &s(-1.0)).unwrap() < 1e-14);
    }

    #[test]
    fn singular_lift_on_example_3_1() {
        let p = instances::example_3_1(0.1).plant;
        let k = Mat::from_row_slice(1, 2, &[-1.0, -1.0]);
        assert!(matches!(
            ecl_forward(&p, &k, &k),
            Err(LqrError::SingularLift { .. })
        ));
    }

    #[test]
    fn cauchy_scalar_examples() {
        let v = |x: f64| Vector::from_element(1, x);
        let c = cauchy_direction(&v(4.0), &v(2.0), &v(0.0), 4.0).unwrap();
        assert_relative_eq!(c.g_c[0], 4.0);
        assert_relative_eq!(c.lower_bound, 2.0);
        // h2(x) = x^2 - x - 3, gap h2(2) - h2(0.5) = -1 - (-3.25) = 2.25
        let c = cauchy_direction(&v(3.0), &v(2.0), &v(0.5), 2.25).unwrap();
        assert_relative_eq!(c.g_c[0], 3.0);
        assert!(c.norm >= c.lower_bound);
        let c = cauchy_direction(&v(1.0), &v(1.0), &v(1.0), 0.0).unwrap();
        assert_eq!(c.norm, 0.0);
    }

    #[test]
    fn cauchy_on_single_integrator_lift() {
        let p = instances::single_integrator().plant;
        let ks = s(-1.0);
        let pt = ecl_forward(&p, &s(-2.0), &ks).unwrap();
        let (gy, gx) = f_cvx_grad(&p, &pt.y, &pt.x, &ks).unwrap();
        assert_relative_eq!(gy[(0, 0)], -4.0, epsilon = 1e-12);
        assert_relative_eq!(gx[(0, 0)], 1.0, epsilon = 1e-12);
        let c = cauchy_direction(
            &lift_coordinates(&gy, &gx),
            &lift_coordinates(&pt.y, &pt.x),
            &lift_coordinates(&s(0.0), &s(1.0)),
            0.5,
        )
        .unwrap();
        assert_relative_eq!(c.lower_bound, 0.5 / 0.5f64.sqrt(), epsilon = 1e-12);
        assert!(c.norm >= c.lower_bound);
    }
}
