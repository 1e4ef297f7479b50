//! Dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{LqrError, Result};
use crate::schur::RealSchur;

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Symmetric part `(M + M') / 2`.
pub fn sym(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub fn all_finite(m: &Mat) -> bool {
    m.iter().all(|v| v.is_finite())
}

pub fn frobenius_inner(a: &Mat, b: &Mat) -> f64 {
    a.component_mul(b).sum()
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &Mat) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut vals: Vec<f64> = SymmetricEigen::new(sym(m))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    vals.sort_by(f64::total_cmp);
    vals
}

pub fn lambda_min(m: &Mat) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(0.0)
}

pub fn lambda_max(m: &Mat) -> f64 {
    sym_eigenvalues(m).last().copied().unwrap_or(0.0)
}

/// Symmetric PSD square root; negative eigenvalues are clamped to zero.
pub fn psd_sqrt(m: &Mat) -> Mat {
    let n = m.nrows();
    if n == 0 {
        return Mat::zeros(0, 0);
    }
    let eig = SymmetricEigen::new(sym(m));
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    sym(&(v * Mat::from_diagonal(&roots) * v.transpose()))
}

/// Singular values, descending.
pub fn singular_values(m: &Mat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn spectral_norm(m: &Mat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Numerical rank: number of singular values above `rel * sigma_max`.
pub fn rank(m: &Mat, rel: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&smax) if smax > 0.0 => s.iter().filter(|&&v| v > rel * smax).count(),
        _ => 0,
    }
}

/// Rank of the complex matrix `re + i im`, via its real 2x2 embedding.
pub fn complex_rank(re: &Mat, im: &Mat, rel: f64) -> usize {
    let (r, c) = re.shape();
    let mut big = Mat::zeros(2 * r, 2 * c);
    big.view_mut((0, 0), (r, c)).copy_from(re);
    big.view_mut((0, c), (r, c)).copy_from(&(-im));
    big.view_mut((r, 0), (r, c)).copy_from(im);
    big.view_mut((r, c), (r, c)).copy_from(re);
    rank(&big, rel) / 2
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

/// Column-major vectorization.
pub fn vec(m: &Mat) -> Vector {
    Vector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &Vector, rows: usize, cols: usize) -> Mat {
    Mat::from_column_slice(rows, cols, v.as_slice())
}

/// Commutation matrix `P` with `P vec(M) = vec(M')` for `M` of shape `rows x cols`.
pub fn commutation(rows: usize, cols: usize) -> Mat {
    let mut p = Mat::zeros(rows * cols, rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            // M[i,j] sits at j*rows + i in vec(M) and at i*cols + j in vec(M').
            p[(i * cols + j, j * rows + i)] = 1.0;
        }
    }
    p
}

pub fn hstack(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.nrows(), b.nrows());
    let mut out = Mat::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

/// Assemble `[[a, b], [c, d]]`.
pub fn block2(a: &Mat, b: &Mat, c: &Mat, d: &Mat) -> Mat {
    let (r1, c1) = a.shape();
    let (r2, c2) = d.shape();
    let mut out = Mat::zeros(r1 + r2, c1 + c2);
    out.view_mut((0, 0), (r1, c1)).copy_from(a);
    out.view_mut((0, c1), (r1, c2)).copy_from(b);
    out.view_mut((r1, 0), (r2, c1)).copy_from(c);
    out.view_mut((r1, c1), (r2, c2)).copy_from(d);
    out
}

/// Solve `a x = b` for symmetric positive definite `a`, falling back to LU.
pub fn solve_spd(a: &Mat, b: &Mat) -> Result<Mat> {
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.solve(b));
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| LqrError::Numerical("singular system in SPD solve".into()))
}

pub fn solve_lu(a: &Mat, b: &Mat) -> Result<Mat> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| LqrError::Numerical("singular linear system".into()))
}

/// Complex eigenvalues of a general square matrix.
pub fn eigenvalues(m: &Mat) -> Result<Vec<Complex64>> {
    Ok(RealSchur::new(m)?.eigenvalues())
}

/// Largest real part among the eigenvalues of `m`.
pub fn spectral_abscissa(m: &Mat) -> Result<f64> {
    if m.nrows() != m.ncols() {
        return Err(LqrError::Dimension(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(eigenvalues(m)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

pub fn matrix_exp(m: &Mat) -> Mat {
    m.exp()
}
