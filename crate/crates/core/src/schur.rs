//! Real Schur form with explicit block bookkeeping, eigenvalue reordering and
//! a quasi-triangular Lyapunov solver (the back-substitution half of
//! Bartels-Stewart).

use nalgebra::Schur;
use num_complex::Complex64;

use crate::error::{LqrError, Result};
use crate::linalg::{all_finite, kron, solve_lu, unvec, vec, Mat};

/// A diagonal block of a quasi-upper-triangular matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub start: usize,
    pub size: usize,
}

/// `M = U T U'` with `U` orthogonal and `T` quasi-upper-triangular. Every
/// 2x2 diagonal block carries a complex-conjugate eigenvalue pair.
#[derive(Debug, Clone)]
pub struct RealSchur {
    pub u: Mat,
    pub t: Mat,
    blocks: Vec<Block>,
}

impl RealSchur {
    pub fn new(m: &Mat) -> Result<Self> {
        let n = m.nrows();
        if n != m.ncols() {
            return Err(LqrError::Dimension(format!(
                "Schur form needs a square matrix, got {}x{}",
                n,
                m.ncols()
            )));
        }
        if !all_finite(m) {
            return Err(LqrError::InvalidInput("non-finite matrix entry".into()));
        }
        if n == 0 {
            return Ok(Self {
                u: Mat::zeros(0, 0),
                t: Mat::zeros(0, 0),
                blocks: Vec::new(),
            });
        }
        let (u, t) = Schur::try_new(m.clone(), f64::EPSILON, 1000 * n)
            .ok_or_else(|| LqrError::Numerical("real Schur iteration did not converge".into()))?
            .unpack();
        let mut schur = Self {
            u,
            t,
            blocks: Vec::new(),
        };
        schur.find_blocks()?;
        schur.split_real_pairs();

        let scale = 1.0 + m.norm();
        let err = (&schur.u * &schur.t * schur.u.transpose() - m).norm();
        if err > 1e-10 * scale {
            return Err(LqrError::Numerical(format!(
                "Schur reconstruction error {err:.3e} exceeds tolerance"
            )));
        }
        Ok(schur)
    }

    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    fn find_blocks(&mut self) -> Result<()> {
        let n = self.dim();
        for c in 0..n {
            for r in (c + 2)..n {
                self.t[(r, c)] = 0.0;
            }
        }
        for i in 0..n.saturating_sub(1) {
            let sub = self.t[(i + 1, i)].abs();
            let diag = self.t[(i, i)].abs() + self.t[(i + 1, i + 1)].abs();
            if sub <= f64::EPSILON * diag || sub < f64::MIN_POSITIVE {
                self.t[(i + 1, i)] = 0.0;
            }
        }
        self.blocks.clear();
        let mut i = 0;
        while i < n {
            if i + 1 < n && self.t[(i + 1, i)] != 0.0 {
                if i + 2 < n && self.t[(i + 2, i + 1)] != 0.0 {
                    return Err(LqrError::Numerical(
                        "Schur form has an unreduced block larger than 2x2".into(),
                    ));
                }
                self.blocks.push(Block { start: i, size: 2 });
                i += 2;
            } else {
                self.blocks.push(Block { start: i, size: 1 });
                i += 1;
            }
        }
        Ok(())
    }

    /// Triangularize any 2x2 block whose eigenvalues are real.
    fn split_real_pairs(&mut self) {
        let mut out = Vec::with_capacity(self.blocks.len());
        for blk in self.blocks.clone() {
            if blk.size == 1 {
                out.push(blk);
                continue;
            }
            let k = blk.start;
            let (a, b, c, d) = (
                self.t[(k, k)],
                self.t[(k, k + 1)],
                self.t[(k + 1, k)],
                self.t[(k + 1, k + 1)],
            );
            let half = 0.5 * (a - d);
            let disc = half * half + b * c;
            if disc < 0.0 {
                out.push(blk);
                continue;
            }
            let lambda = 0.5 * (a + d) + disc.sqrt();
            let v1 = (b, lambda - a);
            let v2 = (lambda - d, c);
            let (x, y) = if v1.0.hypot(v1.1) >= v2.0.hypot(v2.1) {
                v1
            } else {
                v2
            };
            let r = x.hypot(y);
            let (cs, sn) = (x / r, y / r);
            let g = Mat::from_row_slice(2, 2, &[cs, -sn, sn, cs]);
            self.apply_similarity(k, &g);
            self.t[(k + 1, k)] = 0.0;
            out.push(Block { start: k, size: 1 });
            out.push(Block {
                start: k + 1,
                size: 1,
            });
        }
        self.blocks = out;
    }

    /// `T <- Q' T Q`, `U <- U Q` where `Q` acts on indices `k..k+s`.
    fn apply_similarity(&mut self, k: usize, q: &Mat) {
        let n = self.dim();
        let s = q.nrows();
        let rows = q.transpose() * self.t.view((k, 0), (s, n));
        self.t.view_mut((k, 0), (s, n)).copy_from(&rows);
        let cols = self.t.view((0, k), (n, s)) * q;
        self.t.view_mut((0, k), (n, s)).copy_from(&cols);
        let ucols = self.u.view((0, k), (n, s)) * q;
        self.u.view_mut((0, k), (n, s)).copy_from(&ucols);
    }

    pub fn block_eigenvalues(&self, blk: Block) -> Vec<Complex64> {
        let k = blk.start;
        if blk.size == 1 {
            return vec![Complex64::new(self.t[(k, k)], 0.0)];
        }
        let (a, b, c, d) = (
            self.t[(k, k)],
            self.t[(k, k + 1)],
            self.t[(k + 1, k)],
            self.t[(k + 1, k + 1)],
        );
        let mid = 0.5 * (a + d);
        let half = 0.5 * (a - d);
        let disc = half * half + b * c;
        if disc >= 0.0 {
            let r = disc.sqrt();
            vec![Complex64::new(mid + r, 0.0), Complex64::new(mid - r, 0.0)]
        } else {
            let w = (-disc).sqrt();
            vec![Complex64::new(mid, w), Complex64::new(mid, -w)]
        }
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.blocks
            .iter()
            .flat_map(|&b| self.block_eigenvalues(b))
            .collect()
    }

    /// Move every block whose eigenvalues satisfy `select` to the leading
    /// positions. Returns the dimension of the selected invariant subspace,
    /// spanned by the first columns of `u`.
    pub fn reorder<F>(&mut self, select: F) -> Result<usize>
    where
        F: Fn(Complex64) -> bool,
    {
        let mut target = 0;
        for j in 0..self.blocks.len() {
            let ev = self.block_eigenvalues(self.blocks[j])[0];
            if select(ev) {
                let mut cur = j;
                while cur > target {
                    self.swap_adjacent(cur - 1)?;
                    cur -= 1;
                }
                target += 1;
            }
        }
        Ok(self.blocks[..target].iter().map(|b| b.size).sum())
    }

    /// Exchange blocks `i` and `i + 1` by an orthogonal similarity.
    fn swap_adjacent(&mut self, i: usize) -> Result<()> {
        let (b1, b2) = (self.blocks[i], self.blocks[i + 1]);
        let k = b1.start;
        let (p, q) = (b1.size, b2.size);
        let s = p + q;
        let a11 = self.t.view((k, k), (p, p)).clone_owned();
        let a12 = self.t.view((k, k + p), (p, q)).clone_owned();
        let a22 = self.t.view((k + p, k + p), (q, q)).clone_owned();

        // A11 X - X A22 = A12  =>  [-X; I] spans the invariant subspace of A22.
        let sys = kron(&Mat::identity(q, q), &a11) - kron(&a22.transpose(), &Mat::identity(p, p));
        let x = unvec(
            &solve_lu(
                &sys,
                &Mat::from_column_slice(p * q, 1, vec(&a12).as_slice()),
            )
            .map_err(|_| {
                LqrError::IllConditioned("cannot swap blocks with equal eigenvalues".into())
            })?
            .column(0)
            .clone_owned(),
            p,
            q,
        );
        let mut basis = Mat::zeros(s, q + s);
        basis.view_mut((0, 0), (p, q)).copy_from(&(-x));
        basis.view_mut((p, 0), (q, q)).fill_with_identity();
        basis.view_mut((0, q), (s, s)).fill_with_identity();
        let qmat = basis.qr().q();
        self.apply_similarity(k, &qmat);

        let leak = self.t.view((k + q, k), (p, q)).norm();
        if leak > 1e-10 * (1.0 + self.t.view((k, k), (s, s)).norm()) {
            return Err(LqrError::IllConditioned(format!(
                "block swap left a residual of {leak:.3e}"
            )));
        }
        self.t.view_mut((k + q, k), (p, q)).fill(0.0);
        self.blocks[i] = Block { start: k, size: q };
        self.blocks[i + 1] = Block {
            start: k + q,
            size: p,
        };
        Ok(())
    }

    /// Solve `T Y + Y T' = C` by block back-substitution.
    pub fn solve_quasi_triangular_lyapunov(&self, c: &Mat) -> Result<Mat> {
        let n = self.dim();
        let t = &self.t;
        let mut y = Mat::zeros(n, n);
        for bj in self.blocks.iter().rev() {
            for bi in self.blocks.iter().rev() {
                let (i0, p) = (bi.start, bi.size);
                let (j0, q) = (bj.start, bj.size);
                let mut rhs = c.view((i0, j0), (p, q)).clone_owned();
                let below = i0 + p;
                if below < n {
                    rhs -=
                        t.view((i0, below), (p, n - below)) * y.view((below, j0), (n - below, q));
                }
                let right = j0 + q;
                if right < n {
                    rhs -= y.view((i0, right), (p, n - right))
                        * t.view((j0, right), (q, n - right)).transpose();
                }
                let tii = t.view((i0, i0), (p, p)).clone_owned();
                let tjj = t.view((j0, j0), (q, q)).clone_owned();
                let sys = kron(&Mat::identity(q, q), &tii) + kron(&tjj, &Mat::identity(p, p));
                let sol = solve_lu(&sys, &Mat::from_column_slice(p * q, 1, rhs.as_slice()))
                    .map_err(|_| {
                        LqrError::Numerical(
                            "Lyapunov operator is singular (eigenvalues sum to zero)".into(),
                        )
                    })?;
                y.view_mut((i0, j0), (p, q))
                    .copy_from(&Mat::from_column_slice(p, q, sol.as_slice()));
            }
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample() -> Mat {
        Mat::from_row_slice(
            5,
            5,
            &[
                0.3, -1.2, 0.5, 2.0, 0.1, //
                1.1, 0.2, -0.7, 0.4, 0.9, //
                -0.4, 0.8, -1.5, 0.3, 0.2, //
                0.6, -0.2, 0.1, 0.7, -1.1, //
                0.0, 0.5, 1.3, -0.6, -0.9,
            ],
        )
    }

    #[test]
    fn reorder_puts_stable_block_first() {
        let m = sample();
        let mut s = RealSchur::new(&m).unwrap();
        let stable_count = s.eigenvalues().iter().filter(|z| z.re < 0.0).count();
        let k = s.reorder(|z| z.re < 0.0).unwrap();
        assert_eq!(k, stable_count);
        let ev = s.eigenvalues();
        assert!(ev[..k].iter().all(|z| z.re < 0.0));
        assert!(ev[k..].iter().all(|z| z.re >= 0.0));
        assert_relative_eq!(&s.u * &s.t * s.u.transpose(), m, epsilon = 1e-11);
        assert_relative_eq!(s.u.transpose() * &s.u, Mat::identity(5, 5), epsilon = 1e-12);
    }

    #[test]
    fn quasi_triangular_lyapunov_residual() {
        let f = sample() - Mat::identity(5, 5) * 4.0;
        let s = RealSchur::new(&f).unwrap();
        let c = Mat::from_fn(5, 5, |i, j| (i + 2 * j) as f64 * 0.1);
        let y = s.solve_quasi_triangular_lyapunov(&c).unwrap();
        assert_relative_eq!(&s.t * &y + &y * s.t.transpose(), c, epsilon = 1e-12);
    }

    #[test]
    fn real_pair_block_is_split() {
        let m = Mat::from_row_slice(2, 2, &[1.0, 2.0, 3.0, -4.0]);
        let s = RealSchur::new(&m).unwrap();
        assert_eq!(s.blocks().len(), 2);
        let mut ev: Vec<f64> = s.eigenvalues().iter().map(|z| z.re).collect();
        ev.sort_by(f64::total_cmp);
        assert_relative_eq!(ev[0], -5.0, epsilon = 1e-12);
        assert_relative_eq!(ev[1], 2.0, epsilon = 1e-12);
    }
}
