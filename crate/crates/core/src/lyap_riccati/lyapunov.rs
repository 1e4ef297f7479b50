use serde::{Deserialize, Serialize};

use crate::error::{LqrError, Result};
use crate::linalg::{all_finite, lambda_min, sym, Mat};
use crate::model::Plant;
use crate::schur::RealSchur;
use crate::serde_matrix;
use crate::tolerances::Tolerances;

/// Closed-loop Gramian `X` solving `(A+BK)X + X(A+BK)' + W = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramianSolution {
    #[serde(rename = "X", with = "serde_matrix")]
    pub x: Mat,
    #[serde(rename = "K", with = "serde_matrix")]
    pub k: Mat,
    pub residual: f64,
    #[serde(rename = "lambda_min_X")]
    pub lambda_min_x: f64,
}

/// Value matrix `P` solving `(A+BK)'P + P(A+BK) + K'RK + Q = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueMatrix {
    #[serde(rename = "P", with = "serde_matrix")]
    pub p: Mat,
    pub residual: f64,
}

fn lyapunov_residual(f: &Mat, s: &Mat, x: &Mat) -> Mat {
    f * x + x * f.transpose() + s
}

pub fn solve_lyapunov(f: &Mat, s: &Mat) -> Result<Mat> {
    solve_lyapunov_with(f, s, &Tolerances::DEFAULT)
}

/// Solve `F X + X F' + S = 0` for stable `F` (Bartels-Stewart on the real
/// Schur form of `F`, plus up to two residual-correction sweeps).
pub fn solve_lyapunov_with(f: &Mat, s: &Mat, tol: &Tolerances) -> Result<Mat> {
    let n = f.nrows();
    if f.ncols() != n || s.shape() != (n, n) {
        return Err(LqrError::Dimension(format!(
            "Lyapunov data must be square and conformal, got F {:?}, S {:?}",
            f.shape(),
            s.shape()
        )));
    }
    if !all_finite(f) || !all_finite(s) {
        return Err(LqrError::InvalidInput("non-finite Lyapunov data".into()));
    }
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let schur = RealSchur::new(f)?;
    let abscissa = schur
        .eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if abscissa >= -tol.stability {
        return Err(LqrError::Stability { abscissa });
    }
    let u = &schur.u;
    let solve = |rhs: &Mat| -> Result<Mat> {
        let c = -(u.transpose() * rhs * u);
        let y = schur.solve_quasi_triangular_lyapunov(&c)?;
        Ok(sym(&(u * y * u.transpose())))
    };
    let mut x = solve(s)?;
    let bound = |x: &Mat| tol.lyapunov_residual * (1.0 + x.norm());
    let mut res = lyapunov_residual(f, s, &x);
    for _ in 0..2 {
        let refined = &x + solve(&res)?;
        let refined_res = lyapunov_residual(f, s, &refined);
        if refined_res.norm() >= res.norm() {
            break;
        }
        x = refined;
        res = refined_res;
    }
    if res.norm() > bound(&x) {
        return Err(LqrError::Numerical(format!(
            "Lyapunov residual {:.3e} exceeds {:.3e}",
            res.norm(),
            bound(&x)
        )));
    }
    Ok(x)
}

/// Gramian of the closed loop `A + BK` driven by `W`.
pub fn closed_loop_gramian(plant: &Plant, k: &Mat) -> Result<GramianSolution> {
    let f = plant.closed_loop(k)?;
    let x = solve_lyapunov(&f, plant.w())?;
    let residual = lyapunov_residual(&f, plant.w(), &x).norm();
    Ok(GramianSolution {
        lambda_min_x: lambda_min(&x),
        residual,
        x,
        k: k.clone(),
    })
}

pub fn dual_value_matrix(plant: &Plant, k: &Mat) -> Result<ValueMatrix> {
    let f = plant.closed_loop(k)?;
    let s = plant.q() + k.transpose() * plant.r() * k;
    let ft = f.transpose();
    let p = solve_lyapunov(&ft, &s)?;
    let residual = lyapunov_residual(&ft, &s, &p).norm();
    Ok(ValueMatrix { p, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;
    use crate::linalg::{kron, unvec, vec};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn m(r: usize, c: usize, v: &[f64]) -> Mat {
        Mat::from_row_slice(r, c, v)
    }

    /// Independent route: (I ⊗ F + F ⊗ I) vec X = -vec S.
    fn kronecker_oracle(f: &Mat, s: &Mat) -> Mat {
        let n = f.nrows();
        let eye = Mat::identity(n, n);
        let sys = kron(&eye, f) + kron(f, &eye);
        let rhs = -vec(s);
        unvec(&sys.lu().solve(&rhs).unwrap(), n, n)
    }

    #[test]
    fn scalar_lyapunov() {
        let x = solve_lyapunov(&m(1, 1, &[-1.0]), &m(1, 1, &[2.0])).unwrap();
        assert_relative_eq!(x[(0, 0)], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn example_3_1_gramian() {
        let f = m(2, 2, &[-2.0, -0.9, -0.9, -2.0]);
        let s = m(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        let x = solve_lyapunov(&f, &s).unwrap();
        assert_relative_eq!(x, &s / 2.2, epsilon = 1e-14);
    }

    #[test]
    fn unstable_operator_is_rejected() {
        let err = solve_lyapunov(&m(1, 1, &[0.5]), &m(1, 1, &[1.0])).unwrap_err();
        assert!(matches!(err, LqrError::Stability { abscissa } if (abscissa - 0.5).abs() < 1e-12));
        assert!(solve_lyapunov(&m(1, 1, &[-1.0]), &Mat::zeros(2, 2)).is_err());
    }

    #[test]
    fn closed_loop_gramian_examples() {
        let p = instances::single_integrator().plant;
        let g = closed_loop_gramian(&p, &m(1, 1, &[-1.0])).unwrap();
        assert_relative_eq!(g.x[(0, 0)], 1.0, epsilon = 1e-14);
        let g = closed_loop_gramian(&p, &m(1, 1, &[-2.0])).unwrap();
        assert_relative_eq!(g.x[(0, 0)], 0.5, epsilon = 1e-14);

        let p = instances::example_3_1(0.1).plant;
        let g = closed_loop_gramian(&p, &m(1, 2, &[-1.0, -1.0])).unwrap();
        assert_relative_eq!(g.x, m(2, 2, &[1.0, -1.0, -1.0, 1.0]) / 2.2, epsilon = 1e-14);
        assert!(g.lambda_min_x.abs() < 1e-14);

        let err = closed_loop_gramian(&instances::single_integrator().plant, &m(1, 1, &[1.0]))
            .unwrap_err();
        assert!(matches!(err, LqrError::Stability { .. }));
    }

    #[test]
    fn dual_value_matrix_examples() {
        let p = instances::single_integrator().plant;
        assert_relative_eq!(
            dual_value_matrix(&p, &m(1, 1, &[-1.0])).unwrap().p[(0, 0)],
            2.0,
            epsilon = 1e-13
        );
        assert_relative_eq!(
            dual_value_matrix(&p, &m(1, 1, &[-2.0])).unwrap().p[(0, 0)],
            2.5,
            epsilon = 1e-13
        );

        let stable = Plant::new(
            Mat::identity(2, 2) * -0.5,
            Mat::zeros(2, 1),
            Mat::identity(2, 2),
            m(1, 1, &[1.0]),
            Mat::identity(2, 2),
        )
        .unwrap();
        let v = dual_value_matrix(&stable, &Mat::zeros(1, 2)).unwrap();
        assert_relative_eq!(v.p, Mat::identity(2, 2), epsilon = 1e-14);
    }

    fn stable_matrix(n: usize) -> impl Strategy<Value = Mat> {
        proptest::collection::vec(-1.0..1.0f64, n * n).prop_map(move |v| {
            let g = Mat::from_vec(n, n, v);
            let shift = crate::linalg::spectral_abscissa(&g).unwrap() + 0.3;
            g - Mat::identity(n, n) * shift
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn agrees_with_kronecker_oracle(
            (f, s) in (1usize..=6).prop_flat_map(|n| (
                stable_matrix(n),
                proptest::collection::vec(-1.0..1.0f64, n * n).prop_map(move |v| {
                    let g = Mat::from_vec(n, n, v);
                    &g * g.transpose()
                }),
            ))
        ) {
            let x = solve_lyapunov(&f, &s).unwrap();
            let oracle = kronecker_oracle(&f, &s);
            prop_assert!((&x - &oracle).norm() <= 1e-10 * (1.0 + oracle.norm()),
                "gap {}", (&x - &oracle).norm());
            prop_assert!((&x - x.transpose()).norm() <= 1e-12 * (1.0 + x.norm()));
        }
    }
}
