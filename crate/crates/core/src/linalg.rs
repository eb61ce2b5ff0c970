//! Dense symmetric matrix algebra with explicit tolerances.
//!
//! Every matrix that enters the Riccati machinery is symmetric in exact
//! arithmetic. [`SymMat`] enforces that on construction by averaging with the
//! transpose, and [`BlockSymMat`] stores a `2n×2n` symmetric matrix as its four
//! `n×n` blocks with the lower off-diagonal block implied.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{DreError, Result};

/// Thresholds used for definiteness tests and equality assertions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Definiteness margin coefficient; the effective margin for a matrix `S`
    /// is `pd_margin · (1 + ‖S‖_F)`.
    pub pd_margin: f64,
    /// Relative tolerance for matrix equality checks.
    pub match_rtol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            pd_margin: 1e-10,
            match_rtol: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn new(pd_margin: f64, match_rtol: f64) -> Result<Self> {
        if !pd_margin.is_finite() || pd_margin < 0.0 {
            return Err(DreError::InvalidProblem(format!(
                "pd_margin must be finite and non-negative, got {pd_margin}"
            )));
        }
        if !match_rtol.is_finite() || match_rtol <= 0.0 {
            return Err(DreError::InvalidProblem(format!(
                "match_rtol must be finite and positive, got {match_rtol}"
            )));
        }
        Ok(Tolerances {
            pd_margin,
            match_rtol,
        })
    }

    pub fn margin_for(&self, s: &SymMat) -> f64 {
        self.pd_margin * (1.0 + s.norm())
    }
}

/// Smallest singular value (relative to the largest, floored at 1) below which
/// a matrix is treated as singular by [`invert`].
pub const SINGULAR_RTOL: f64 = 1e-13;

/// Real symmetric `n×n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMat {
    m: DMatrix<f64>,
}

impl SymMat {
    /// `(raw + rawᵀ)/2`. Rejects non-square and non-finite input.
    pub fn symmetrize(raw: &DMatrix<f64>) -> Result<SymMat> {
        if raw.nrows() != raw.ncols() {
            return Err(DreError::InvalidMatrix(format!(
                "expected a square matrix, got {}x{}",
                raw.nrows(),
                raw.ncols()
            )));
        }
        if raw.nrows() == 0 {
            return Err(DreError::InvalidMatrix("empty matrix".into()));
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(DreError::InvalidMatrix("non-finite entry".into()));
        }
        Ok(SymMat {
            m: (raw + raw.transpose()) * 0.5,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<SymMat> {
        SymMat::symmetrize(&matrix_from_rows(rows)?)
    }

    pub fn identity(n: usize) -> SymMat {
        SymMat {
            m: DMatrix::identity(n, n),
        }
    }

    pub fn zeros(n: usize) -> SymMat {
        SymMat {
            m: DMatrix::zeros(n, n),
        }
    }

    pub fn scalar(v: f64) -> SymMat {
        SymMat {
            m: DMatrix::from_element(1, 1, v),
        }
    }

    /// Largest `|raw[i][j] − raw[j][i]|`.
    pub fn max_asymmetry(raw: &DMatrix<f64>) -> f64 {
        (raw - raw.transpose()).amax()
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.m.norm()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut e: Vec<f64> = SymmetricEigen::new(self.m.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        e.sort_by(|a, b| a.total_cmp(b));
        e
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues().last().unwrap()
    }

    pub fn add(&self, other: &SymMat) -> SymMat {
        SymMat {
            m: &self.m + &other.m,
        }
    }

    pub fn sub(&self, other: &SymMat) -> SymMat {
        SymMat {
            m: &self.m - &other.m,
        }
    }

    pub fn neg(&self) -> SymMat {
        SymMat { m: -&self.m }
    }

    pub fn scale(&self, s: f64) -> SymMat {
        SymMat { m: &self.m * s }
    }

    /// `½ xᵀ S x`.
    pub fn half_quadratic_form(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += x[i] * self.m[(i, j)] * x[j];
            }
        }
        0.5 * acc
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.m)
    }

    /// Relative Frobenius distance `‖self − other‖_F / (1 + ‖other‖_F)`.
    pub fn rel_distance(&self, other: &SymMat) -> f64 {
        (&self.m - &other.m).norm() / (1.0 + other.norm())
    }
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err(DreError::InvalidMatrix("matrix has no rows".into()));
    }
    let ncols = rows[0].len();
    if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(DreError::InvalidMatrix("ragged or empty rows".into()));
    }
    let m = DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]);
    if m.iter().any(|v| !v.is_finite()) {
        return Err(DreError::InvalidMatrix("non-finite entry".into()));
    }
    Ok(m)
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Symmetrize a product that is symmetric in exact arithmetic.
pub(crate) fn sym(m: DMatrix<f64>) -> SymMat {
    SymMat {
        m: (&m + m.transpose()) * 0.5,
    }
}

/// Congruence `Xᵀ S X`.
pub fn congruence(s: &SymMat, x: &DMatrix<f64>) -> SymMat {
    sym(x.transpose() * s.as_matrix() * x)
}

pub fn is_negative_definite(s: &SymMat, tol: &Tolerances) -> bool {
    s.max_eigenvalue() < -tol.margin_for(s)
}

pub fn is_positive_definite(s: &SymMat, tol: &Tolerances) -> bool {
    s.min_eigenvalue() > tol.margin_for(s)
}

/// Inverse of a symmetric matrix together with its residual `‖S·S⁻¹ − I‖_F`.
#[derive(Debug, Clone)]
pub struct Inverse {
    pub value: SymMat,
    pub residual: f64,
}

/// Inverts `s`, failing with [`DreError::SingularPivot`] when its smallest
/// singular value is below `SINGULAR_RTOL · max(1, largest singular value)`.
pub fn invert(s: &SymMat, context: &str) -> Result<Inverse> {
    let eig = s.eigenvalues();
    let min_abs = eig.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    let max_abs = eig.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if min_abs <= SINGULAR_RTOL * max_abs.max(1.0) {
        return Err(DreError::SingularPivot {
            context: context.to_string(),
            min_abs_eig: min_abs,
        });
    }
    let inv = s
        .as_matrix()
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| DreError::SingularPivot {
            context: context.to_string(),
            min_abs_eig: min_abs,
        })?;
    let value = sym(inv);
    let n = s.dim();
    let residual = (s.as_matrix() * value.as_matrix() - DMatrix::<f64>::identity(n, n)).norm();
    Ok(Inverse { value, residual })
}

/// `2n×2n` symmetric matrix held as blocks `[[b11, b12], [b12ᵀ, b22]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSymMat {
    pub b11: SymMat,
    pub b12: DMatrix<f64>,
    pub b22: SymMat,
}

impl BlockSymMat {
    pub fn new(b11: SymMat, b12: DMatrix<f64>, b22: SymMat) -> Result<BlockSymMat> {
        let n = b11.dim();
        if b22.dim() != n || b12.nrows() != n || b12.ncols() != n {
            return Err(DreError::DimensionMismatch(format!(
                "blocks must all be {n}x{n}"
            )));
        }
        if b12.iter().any(|v| !v.is_finite()) {
            return Err(DreError::InvalidMatrix("non-finite off-diagonal block".into()));
        }
        Ok(BlockSymMat { b11, b12, b22 })
    }

    /// Splits a full `2n×2n` matrix, symmetrizing it first.
    pub fn from_full(full: &DMatrix<f64>) -> Result<BlockSymMat> {
        let s = SymMat::symmetrize(full)?;
        if s.dim() % 2 != 0 {
            return Err(DreError::DimensionMismatch(
                "block matrix must have even dimension".into(),
            ));
        }
        let n = s.dim() / 2;
        let m = s.as_matrix();
        Ok(BlockSymMat {
            b11: sym(m.view((0, 0), (n, n)).into_owned()),
            b12: m.view((0, n), (n, n)).into_owned(),
            b22: sym(m.view((n, n), (n, n)).into_owned()),
        })
    }

    pub fn block_dim(&self) -> usize {
        self.b11.dim()
    }

    pub fn b21(&self) -> DMatrix<f64> {
        self.b12.transpose()
    }

    pub fn to_full(&self) -> DMatrix<f64> {
        let n = self.block_dim();
        let mut full = DMatrix::zeros(2 * n, 2 * n);
        full.view_mut((0, 0), (n, n)).copy_from(self.b11.as_matrix());
        full.view_mut((0, n), (n, n)).copy_from(&self.b12);
        full.view_mut((n, 0), (n, n)).copy_from(&self.b12.transpose());
        full.view_mut((n, n), (n, n)).copy_from(self.b22.as_matrix());
        full
    }

    pub fn norm(&self) -> f64 {
        (self.b11.norm().powi(2) + 2.0 * self.b12.norm_squared() + self.b22.norm().powi(2)).sqrt()
    }

    pub fn neg(&self) -> BlockSymMat {
        BlockSymMat {
            b11: self.b11.neg(),
            b12: -&self.b12,
            b22: self.b22.neg(),
        }
    }

    /// Relative Frobenius distance `‖self − other‖_F / (1 + ‖other‖_F)`.
    pub fn rel_distance(&self, other: &BlockSymMat) -> f64 {
        let d = (self.b11.sub(&other.b11).norm().powi(2)
            + 2.0 * (&self.b12 - &other.b12).norm_squared()
            + self.b22.sub(&other.b22).norm().powi(2))
        .sqrt();
        d / (1.0 + other.norm())
    }

    /// `½ [x; y]ᵀ H [x; y]`.
    pub fn half_quadratic_form(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.block_dim();
        let mut cross = 0.0;
        for i in 0..n {
            for j in 0..n {
                cross += x[i] * self.b12[(i, j)] * y[j];
            }
        }
        self.b11.half_quadratic_form(x) + cross + self.b22.half_quadratic_form(y)
    }
}
