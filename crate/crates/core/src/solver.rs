//! Linear solvers for the SPD systems produced by assembly.
//!
//! [`solve_spd`] is a (Jacobi-preconditioned) conjugate gradient solver with
//! a normwise residual test. [`CholeskySolver`] is a sparse Cholesky
//! factorization backed by `faer`; on the lumped M-matrix systems every
//! operation of the factorization and of the triangular solves combines
//! terms of a single sign, so it resolves interior values many orders of
//! magnitude below `rel_tol * |b|` with the correct sign. That is what the
//! discrete maximum-principle check needs.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{Col, Side};
use thiserror::Error;

use crate::sparse::CsrMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("no convergence after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("dimension mismatch: matrix is {matrix}, vector has length {vector}")]
    DimensionMismatch { matrix: usize, vector: usize },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("factorization failed: {0}")]
    Factorization(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    None,
    Jacobi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub rel_tol: f64,
    /// `None` means `10 * n`.
    pub max_iters: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_iters: None,
            preconditioner: Preconditioner::Jacobi,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(SolverError::InvalidConfig(format!(
                "rel_tol must lie in (0, 1), got {}",
                self.rel_tol
            )));
        }
        if self.max_iters == Some(0) {
            return Err(SolverError::InvalidConfig(
                "max_iters must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    pub iterations: usize,
    pub final_relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Relative residual `|b - A x| / |b|` (or `|b - A x|` when `b = 0`).
pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let bn = norm(b);
    if bn > 0.0 {
        norm(&r) / bn
    } else {
        norm(&r)
    }
}

/// Solves `A x = b` by preconditioned conjugate gradients from `x = 0`.
pub fn solve_spd(
    a: &CsrMatrix,
    b: &[f64],
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, SolveStats), SolverError> {
    cfg.validate()?;
    let n = a.dim();
    if b.len() != n {
        return Err(SolverError::DimensionMismatch {
            matrix: n,
            vector: b.len(),
        });
    }
    let mut x = vec![0.0; n];
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok((x, SolveStats::default()));
    }
    let inv_diag: Vec<f64> = match cfg.preconditioner {
        Preconditioner::None => vec![1.0; n],
        Preconditioner::Jacobi => {
            let d = a.diagonal();
            if d.iter().any(|&v| v <= 0.0) {
                return Err(SolverError::NotPositiveDefinite);
            }
            d.iter().map(|v| 1.0 / v).collect()
        }
    };
    let max_iters = cfg.max_iters.unwrap_or(10 * n.max(1));

    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut residual = 1.0;

    for it in 1..=max_iters {
        a.matvec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap.is_nan() || pap <= 0.0 {
            return Err(SolverError::NotPositiveDefinite);
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        residual = norm(&r) / b_norm;
        if residual <= cfg.rel_tol {
            // Guard against drift of the recursive residual.
            let true_residual = relative_residual(a, &x, b);
            if true_residual <= cfg.rel_tol {
                return Ok((
                    x,
                    SolveStats {
                        iterations: it,
                        final_relative_residual: true_residual,
                    },
                ));
            }
            let ax = a.matvec(&x);
            for i in 0..n {
                r[i] = b[i] - ax[i];
            }
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(SolverError::NoConvergence {
        iterations: max_iters,
        residual,
    })
}

/// Symbolic analysis of a sparsity pattern, reusable for every matrix with
/// the same pattern (e.g. across an alpha sweep).
#[derive(Debug, Clone)]
pub struct CholeskySymbolic {
    dim: usize,
    symbolic: SymbolicLlt<usize>,
}

impl CholeskySymbolic {
    pub fn analyze(a: &CsrMatrix) -> Result<Self, SolverError> {
        let mat = to_faer(a)?;
        let symbolic = SymbolicLlt::try_new(mat.symbolic(), Side::Lower)
            .map_err(|e| SolverError::Factorization(format!("{e:?}")))?;
        Ok(Self {
            dim: a.dim(),
            symbolic,
        })
    }
}

/// Sparse `L L^T` factorization.
#[derive(Debug, Clone)]
pub struct CholeskySolver {
    dim: usize,
    llt: Llt<usize, f64>,
}

impl CholeskySolver {
    pub fn factor(a: &CsrMatrix) -> Result<Self, SolverError> {
        Self::factor_with(&CholeskySymbolic::analyze(a)?, a)
    }

    /// Numeric factorization reusing a symbolic analysis of the same pattern.
    pub fn factor_with(symbolic: &CholeskySymbolic, a: &CsrMatrix) -> Result<Self, SolverError> {
        if symbolic.dim != a.dim() {
            return Err(SolverError::DimensionMismatch {
                matrix: symbolic.dim,
                vector: a.dim(),
            });
        }
        let mat = to_faer(a)?;
        let llt = Llt::try_new_with_symbolic(symbolic.symbolic.clone(), mat.as_ref(), Side::Lower)
            .map_err(|e| match e {
                faer::sparse::linalg::LltError::Numeric(_) => SolverError::NotPositiveDefinite,
                other => SolverError::Factorization(format!("{other:?}")),
            })?;
        Ok(Self { dim: a.dim(), llt })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, SolverError> {
        if b.len() != self.dim {
            return Err(SolverError::DimensionMismatch {
                matrix: self.dim,
                vector: b.len(),
            });
        }
        let rhs = Col::<f64>::from_fn(self.dim, |i| b[i]);
        let x = self.llt.solve(&rhs);
        Ok((0..self.dim).map(|i| x[i]).collect())
    }
}

/// CSR of a symmetric matrix read as CSC (the same arrays describe `A^T`).
fn to_faer(a: &CsrMatrix) -> Result<SparseColMat<usize, f64>, SolverError> {
    let n = a.dim();
    let symbolic =
        SymbolicSparseColMat::new_checked(n, n, a.row_ptr().to_vec(), None, a.col_idx().to_vec());
    Ok(SparseColMat::new(symbolic, a.values().to_vec()))
}

/// Solves with a one-shot Cholesky factorization and reports the residual.
pub fn solve_direct(a: &CsrMatrix, b: &[f64]) -> Result<(Vec<f64>, SolveStats), SolverError> {
    let x = CholeskySolver::factor(a)?.solve(b)?;
    let stats = SolveStats {
        iterations: 0,
        final_relative_residual: relative_residual(a, &x, b),
    };
    Ok((x, stats))
}
