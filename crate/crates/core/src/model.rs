//! Problem data and the structural tests that gate every solver.

use serde::{Deserialize, Serialize};

use crate::error::{LqrError, Result};
use crate::linalg::{
    all_finite, complex_rank, eigenvalues, hstack, lambda_max, lambda_min, psd_sqrt, rank,
    spectral_abscissa, sym, Mat, Vector,
};
use crate::serde_matrix;
use crate::tolerances::Tolerances;

/// An LQR instance `(A, B, Q, R, W)`.
///
/// Construction validates dimensions, finiteness, symmetry of the weights and
/// their definiteness: `Q` PSD and nonzero, `R` PD, `W` PSD.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    a: Mat,
    b: Mat,
    q: Mat,
    r: Mat,
    w: Mat,
}

fn symmetric_checked(name: &str, m: &Mat) -> Result<Mat> {
    let asym = (m - m.transpose()).norm();
    if asym > 1e-9 * (1.0 + m.norm()) {
        return Err(LqrError::InvalidInput(format!(
            "{name} is not symmetric (asymmetry {asym:.3e})"
        )));
    }
    Ok(sym(m))
}

fn psd_slack(m: &Mat, tol: &Tolerances) -> f64 {
    tol.psd_rel * lambda_max(m).abs().max(f64::MIN_POSITIVE)
}

/// Positive definiteness with a relative margin.
pub fn is_positive_definite(m: &Mat, tol: &Tolerances) -> bool {
    let top = lambda_max(m);
    top > 0.0 && lambda_min(m) > tol.psd_rel * top
}

impl Plant {
    pub fn new(a: Mat, b: Mat, q: Mat, r: Mat, w: Mat) -> Result<Self> {
        let tol = Tolerances::DEFAULT;
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(LqrError::Dimension(format!(
                "A must be square and nonempty, got {:?}",
                a.shape()
            )));
        }
        let m = b.ncols();
        if b.nrows() != n || m == 0 {
            return Err(LqrError::Dimension(format!(
                "B must be {n}xm with m > 0, got {:?}",
                b.shape()
            )));
        }
        for (name, mat, dim) in [("Q", &q, n), ("R", &r, m), ("W", &w, n)] {
            if mat.shape() != (dim, dim) {
                return Err(LqrError::Dimension(format!(
                    "{name} must be {dim}x{dim}, got {:?}",
                    mat.shape()
                )));
            }
        }
        for (name, mat) in [("A", &a), ("B", &b), ("Q", &q), ("R", &r), ("W", &w)] {
            if !all_finite(mat) {
                return Err(LqrError::InvalidInput(format!(
                    "{name} has non-finite entries"
                )));
            }
        }
        let q = symmetric_checked("Q", &q)?;
        let r = symmetric_checked("R", &r)?;
        let w = symmetric_checked("W", &w)?;
        if lambda_max(&q) <= 0.0 {
            return Err(LqrError::InvalidInput("Q must be nonzero".into()));
        }
        if lambda_min(&q) < -psd_slack(&q, &tol) {
            return Err(LqrError::InvalidInput(
                "Q is not positive semidefinite".into(),
            ));
        }
        if !is_positive_definite(&r, &tol) {
            return Err(LqrError::InvalidInput("R is not positive definite".into()));
        }
        if lambda_min(&w) < -psd_slack(&w, &tol) {
            return Err(LqrError::InvalidInput(
                "W is not positive semidefinite".into(),
            ));
        }
        Ok(Self { a, b, q, r, w })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn b(&self) -> &Mat {
        &self.b
    }

    pub fn q(&self) -> &Mat {
        &self.q
    }

    pub fn r(&self) -> &Mat {
        &self.r
    }

    pub fn w(&self) -> &Mat {
        &self.w
    }

    /// Same dynamics and weights with a different initial-state covariance.
    pub fn with_covariance(&self, w: Mat) -> Result<Self> {
        Self::new(
            self.a.clone(),
            self.b.clone(),
            self.q.clone(),
            self.r.clone(),
            w,
        )
    }

    /// Same plant with `W = x0 x0'`.
    pub fn with_initial_state(&self, x0: &Vector) -> Result<Self> {
        if x0.len() != self.n() {
            return Err(LqrError::Dimension(format!(
                "x0 must have length {}",
                self.n()
            )));
        }
        self.with_covariance(x0 * x0.transpose())
    }

    pub fn check_gain(&self, k: &Mat) -> Result<()> {
        if k.shape() != (self.m(), self.n()) {
            return Err(LqrError::Dimension(format!(
                "gain must be {}x{}, got {:?}",
                self.m(),
                self.n(),
                k.shape()
            )));
        }
        if !all_finite(k) {
            return Err(LqrError::InvalidInput("gain has non-finite entries".into()));
        }
        Ok(())
    }

    /// `A + B K`.
    pub fn closed_loop(&self, k: &Mat) -> Result<Mat> {
        self.check_gain(k)?;
        Ok(&self.a + &self.b * k)
    }

    /// `R^{-1} B'`.
    pub fn r_inv_bt(&self) -> Result<Mat> {
        crate::linalg::solve_spd(&self.r, &self.b.transpose())
    }
}

/// A static state-feedback gain `u = K x` (`m x n`). Stability of `A + BK`
/// is checked by the operations that need it, not here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeedbackGain(#[serde(with = "serde_matrix")] Mat);

impl FeedbackGain {
    pub fn new(k: Mat) -> Result<Self> {
        if !all_finite(&k) {
            return Err(LqrError::InvalidInput("gain has non-finite entries".into()));
        }
        Ok(Self(k))
    }

    pub fn matrix(&self) -> &Mat {
        &self.0
    }

    pub fn into_matrix(self) -> Mat {
        self.0
    }
}

/// Which sufficient condition for compact sublevel sets and `X ≻ 0` holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SufficientCondition {
    /// `W ≻ 0`.
    A,
    /// `Q ≻ 0`, `(A, B)` controllable, `W = B1 B1'`, `Im B ⊆ Im B1`.
    B,
    /// The finitely checkable parts of the third condition hold; its limit
    /// condition is never claimed.
    Unknown,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralReport {
    pub stable: bool,
    pub stabilizable: bool,
    pub detectable: bool,
    pub controllable: bool,
    pub spectral_abscissa: f64,
    pub assumption1_holds: bool,
    pub sufficient_condition: SufficientCondition,
}

fn require_square(m: &Mat) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(LqrError::Dimension(format!(
            "expected a square matrix, got {:?}",
            m.shape()
        )));
    }
    Ok(())
}

pub fn is_stable(m: &Mat) -> Result<bool> {
    is_stable_with(m, &Tolerances::DEFAULT)
}

pub fn is_stable_with(m: &Mat, tol: &Tolerances) -> Result<bool> {
    require_square(m)?;
    Ok(spectral_abscissa(m)? < -tol.stability)
}

pub fn pbh_stabilizable(a: &Mat, b: &Mat) -> Result<bool> {
    pbh_stabilizable_with(a, b, &Tolerances::DEFAULT)
}

/// PBH test: `rank [A - λI, B] = n` for every eigenvalue with `Re λ ≥ -tol`.
pub fn pbh_stabilizable_with(a: &Mat, b: &Mat, tol: &Tolerances) -> Result<bool> {
    require_square(a)?;
    let n = a.nrows();
    if b.nrows() != n {
        return Err(LqrError::Dimension(format!(
            "B must have {n} rows, got {}",
            b.nrows()
        )));
    }
    for lambda in eigenvalues(a)? {
        if lambda.re < -tol.stability || lambda.im < 0.0 {
            continue;
        }
        let re = hstack(&(a - Mat::identity(n, n) * lambda.re), b);
        let im = hstack(
            &(Mat::identity(n, n) * -lambda.im),
            &Mat::zeros(n, b.ncols()),
        );
        if complex_rank(&re, &im, tol.rank_rel) < n {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn pbh_detectable(c: &Mat, a: &Mat) -> Result<bool> {
    pbh_detectable_with(c, a, &Tolerances::DEFAULT)
}

/// Dual PBH test on `[A' - λI, C']`.
pub fn pbh_detectable_with(c: &Mat, a: &Mat, tol: &Tolerances) -> Result<bool> {
    if c.ncols() != a.nrows() {
        return Err(LqrError::Dimension(format!(
            "C must have {} columns, got {}",
            a.nrows(),
            c.ncols()
        )));
    }
    pbh_stabilizable_with(&a.transpose(), &c.transpose(), tol)
}

pub fn is_controllable(a: &Mat, b: &Mat) -> Result<bool> {
    is_controllable_with(a, b, &Tolerances::DEFAULT)
}

/// Kalman rank test on `[B, AB, ..., A^{n-1} B]`.
pub fn is_controllable_with(a: &Mat, b: &Mat, tol: &Tolerances) -> Result<bool> {
    require_square(a)?;
    let n = a.nrows();
    if b.nrows() != n {
        return Err(LqrError::Dimension(format!(
            "B must have {n} rows, got {}",
            b.nrows()
        )));
    }
    let m = b.ncols();
    let mut ctrb = Mat::zeros(n, n * m);
    let mut block = b.clone();
    for i in 0..n {
        ctrb.view_mut((0, i * m), (n, m)).copy_from(&block);
        block = a * block;
    }
    Ok(rank(&ctrb, tol.rank_rel) == n)
}

pub fn image_inclusion(b: &Mat, b1: &Mat) -> Result<bool> {
    image_inclusion_with(b, b1, &Tolerances::DEFAULT)
}

/// `Im B ⊆ Im B1`, decided as `rank [B1, B] = rank B1`.
pub fn image_inclusion_with(b: &Mat, b1: &Mat, tol: &Tolerances) -> Result<bool> {
    if b.nrows() != b1.nrows() {
        return Err(LqrError::Dimension(format!(
            "B and B1 must have the same row count ({} vs {})",
            b.nrows(),
            b1.nrows()
        )));
    }
    Ok(rank(&hstack(b1, b), tol.rank_rel) == rank(b1, tol.rank_rel))
}

pub fn structural_report(plant: &Plant, b1: Option<&Mat>) -> Result<StructuralReport> {
    structural_report_with(plant, b1, &Tolerances::DEFAULT)
}

pub fn structural_report_with(
    plant: &Plant,
    b1: Option<&Mat>,
    tol: &Tolerances,
) -> Result<StructuralReport> {
    if let Some(b1) = b1 {
        if b1.nrows() != plant.n() || b1.ncols() == 0 {
            return Err(LqrError::Dimension(format!(
                "B1 must have {} rows and at least one column, got {:?}",
                plant.n(),
                b1.shape()
            )));
        }
    }
    let a = plant.a();
    let abscissa = spectral_abscissa(a)?;
    let stabilizable = pbh_stabilizable_with(a, plant.b(), tol)?;
    let detectable = pbh_detectable_with(&psd_sqrt(plant.q()), a, tol)?;
    let controllable = is_controllable_with(a, plant.b(), tol)?;
    // Q ⪰ 0, Q ≠ 0 and R ≻ 0 are construction invariants of `Plant`.
    let assumption1_holds = stabilizable && detectable;

    let sufficient_condition = if !assumption1_holds {
        SufficientCondition::None
    } else if is_positive_definite(plant.w(), tol) {
        SufficientCondition::A
    } else if let Some(b1) = b1 {
        let factored = (plant.w() - b1 * b1.transpose()).norm() <= 1e-9 * (1.0 + plant.w().norm());
        let included = image_inclusion_with(plant.b(), b1, tol)?;
        if controllable && factored && included {
            if is_positive_definite(plant.q(), tol) {
                SufficientCondition::B
            } else {
                SufficientCondition::Unknown
            }
        } else {
            SufficientCondition::None
        }
    } else {
        SufficientCondition::None
    };

    Ok(StructuralReport {
        stable: abscissa < -tol.stability,
        stabilizable,
        detectable,
        controllable,
        spectral_abscissa: abscissa,
        assumption1_holds,
        sufficient_condition,
    })
}

/// JSON instance file: row-major nested arrays, `B1` and `x0` optional.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantFile {
    #[serde(rename = "A", with = "serde_matrix")]
    pub a: Mat,
    #[serde(rename = "B", with = "serde_matrix")]
    pub b: Mat,
    #[serde(rename = "Q", with = "serde_matrix")]
    pub q: Mat,
    #[serde(rename = "R", with = "serde_matrix")]
    pub r: Mat,
    #[serde(rename = "W", with = "serde_matrix")]
    pub w: Mat,
    #[serde(
        rename = "B1",
        default,
        with = "serde_matrix::option",
        skip_serializing_if = "Option::is_none"
    )]
    pub b1: Option<Mat>,
    #[serde(
        default,
        with = "serde_matrix::vector::option",
        skip_serializing_if = "Option::is_none"
    )]
    pub x0: Option<Vector>,
}

/// A validated plant plus the optional factor `B1` and initial state `x0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub plant: Plant,
    pub b1: Option<Mat>,
    pub x0: Option<Vector>,
}

impl Instance {
    pub fn new(plant: Plant) -> Self {
        Self {
            plant,
            b1: None,
            x0: None,
        }
    }

    pub fn from_file(file: PlantFile) -> Result<Self> {
        let plant = Plant::new(file.a, file.b, file.q, file.r, file.w)?;
        if let Some(b1) = &file.b1 {
            if b1.nrows() != plant.n() {
                return Err(LqrError::Dimension(format!(
                    "B1 must have {} rows",
                    plant.n()
                )));
            }
        }
        if let Some(x0) = &file.x0 {
            if x0.len() != plant.n() {
                return Err(LqrError::Dimension(format!(
                    "x0 must have length {}",
                    plant.n()
                )));
            }
        }
        Ok(Self {
            plant,
            b1: file.b1,
            x0: file.x0,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: PlantFile = serde_json::from_str(text)
            .map_err(|e| LqrError::InvalidInput(format!("malformed instance JSON: {e}")))?;
        Self::from_file(file)
    }

    pub fn to_file(&self) -> PlantFile {
        PlantFile {
            a: self.plant.a().clone(),
            b: self.plant.b().clone(),
            q: self.plant.q().clone(),
            r: self.plant.r().clone(),
            w: self.plant.w().clone(),
            b1: self.b1.clone(),
            x0: self.x0.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("plant serialization cannot fail")
    }
}
