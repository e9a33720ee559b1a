//! Sparsity structure of feedback gains.
//!
//! A [`SparsityMask`] is the 0/1 indicator `I_K` of the entries a gain may
//! use. The structural constraint is `F(K) = K o (1 - I_K) = 0`. Only this
//! Hadamard form is supported; general matricial constraints are not.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::system::{CostWeights, LtiSystem};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SparsityMask {
    rows: usize,
    cols: usize,
    /// Row-major allowed flags.
    allowed: Vec<bool>,
}

impl SparsityMask {
    /// Builds a mask from a row-major 0/1 grid.
    pub fn from_grid(grid: &[Vec<u8>]) -> Result<Self> {
        let rows = grid.len();
        let cols = grid.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension("mask grid is empty".into()));
        }
        let mut allowed = Vec::with_capacity(rows * cols);
        for (i, row) in grid.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::Dimension(format!(
                    "mask row {} has {} entries, expected {cols}",
                    i + 1,
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                match v {
                    0 => allowed.push(false),
                    1 => allowed.push(true),
                    _ => {
                        return Err(Error::InvalidArgument(format!(
                            "mask entry ({}, {}) is {v}, expected 0 or 1",
                            i + 1,
                            j + 1
                        )))
                    }
                }
            }
        }
        Self::from_flags(rows, cols, allowed)
    }

    /// All entries allowed: the unstructured case.
    pub fn full(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            allowed: vec![true; rows * cols],
        }
    }

    /// Full mask with the listed 0-based `(row, col)` positions forbidden.
    pub fn with_zeros(rows: usize, cols: usize, zeros: &[(usize, usize)]) -> Result<Self> {
        let mut allowed = vec![true; rows * cols];
        for &(i, j) in zeros {
            if i >= rows || j >= cols {
                return Err(Error::Dimension(format!("zero position ({i}, {j}) is outside {rows}x{cols}")));
            }
            allowed[i * cols + j] = false;
        }
        Self::from_flags(rows, cols, allowed)
    }

    fn from_flags(rows: usize, cols: usize, allowed: Vec<bool>) -> Result<Self> {
        if !allowed.iter().any(|a| *a) {
            return Err(Error::InvalidArgument("mask allows no entries".into()));
        }
        Ok(Self { rows, cols, allowed })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn allows(&self, i: usize, j: usize) -> bool {
        self.allowed[i * self.cols + j]
    }

    /// Number of allowed entries, `|K|`.
    pub fn nnz(&self) -> usize {
        self.allowed.iter().filter(|a| **a).count()
    }

    pub fn is_full(&self) -> bool {
        self.allowed.iter().all(|a| *a)
    }

    /// `I_K` as a real matrix.
    pub fn indicator(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| f64::from(u8::from(self.allows(i, j))))
    }

    /// `1 - I_K`.
    pub fn complement(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| f64::from(u8::from(!self.allows(i, j))))
    }

    pub fn to_grid(&self) -> Vec<Vec<u8>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| u8::from(self.allows(i, j))).collect())
            .collect()
    }

    /// Forbidden positions, 0-based.
    pub fn zeros(&self) -> Vec<(usize, usize)> {
        (0..self.rows)
            .flat_map(|i| (0..self.cols).map(move |j| (i, j)))
            .filter(|&(i, j)| !self.allows(i, j))
            .collect()
    }

    fn check_dims(&self, k: &DMatrix<f64>) -> Result<()> {
        linalg::check_shape("gain", k, self.rows, self.cols)
    }

    /// `K o I_K`: forbidden entries set to exactly `0.0`.
    pub fn restrict(&self, k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_dims(k)?;
        Ok(DMatrix::from_fn(self.rows, self.cols, |i, j| {
            if self.allows(i, j) {
                k[(i, j)]
            } else {
                0.0
            }
        }))
    }

    /// `F(K) = K o (1 - I_K)`: allowed entries set to exactly `0.0`.
    pub fn complement_part(&self, k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_dims(k)?;
        Ok(DMatrix::from_fn(self.rows, self.cols, |i, j| {
            if self.allows(i, j) {
                0.0
            } else {
                k[(i, j)]
            }
        }))
    }

    /// Whether `max |F(K)| <= tol`, with every offending entry listed.
    pub fn check_membership(&self, k: &DMatrix<f64>, tol: f64) -> Result<MembershipReport> {
        if !(tol >= 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be non-negative, got {tol}")));
        }
        self.check_dims(k)?;
        let violations: Vec<Violation> = self
            .zeros()
            .into_iter()
            .filter(|&(i, j)| k[(i, j)].abs() > tol || k[(i, j)].is_nan())
            .map(|(row, col)| Violation {
                row,
                col,
                value: k[(row, col)],
            })
            .collect();
        let max_violation = self
            .zeros()
            .into_iter()
            .map(|(i, j)| k[(i, j)].abs())
            .fold(0.0, f64::max);
        Ok(MembershipReport {
            member: violations.is_empty(),
            max_violation,
            violations,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipReport {
    pub member: bool,
    /// `max |K o (1 - I_K)|`.
    pub max_violation: f64,
    pub violations: Vec<Violation>,
}

/// `F(K)` as a free function.
pub fn project_f(k: &DMatrix<f64>, mask: &SparsityMask) -> Result<DMatrix<f64>> {
    mask.complement_part(k)
}

/// `phi(P) = R^-1 B^T P`, the unstructured gain form.
pub fn unstructured_gain(p: &DMatrix<f64>, b: &DMatrix<f64>, weights: &CostWeights) -> DMatrix<f64> {
    weights.r_inv() * b.transpose() * p
}

/// `K = phi(P) - F(phi(P)) = phi(P) o I_K`.
pub fn structured_gain_from_p(
    p: &DMatrix<f64>,
    sys: &LtiSystem,
    weights: &CostWeights,
    mask: &SparsityMask,
) -> Result<DMatrix<f64>> {
    structured_gain(p, sys.b(), weights, mask)
}

/// Same as [`structured_gain_from_p`] but only needs `B`.
pub fn structured_gain(
    p: &DMatrix<f64>,
    b: &DMatrix<f64>,
    weights: &CostWeights,
    mask: &SparsityMask,
) -> Result<DMatrix<f64>> {
    let n = b.nrows();
    linalg::check_shape("P", p, n, n)?;
    linalg::check_shape("R", weights.r(), b.ncols(), b.ncols())?;
    mask.restrict(&unstructured_gain(p, b, weights))
}
