//! Dense linear-algebra kernels.

mod csv;
mod eig;
mod lu;
mod svd;

use thiserror::Error;

pub use self::csv::{fmt_human, fmt_machine, read_matrix_csv, write_matrix_csv};
pub use eig::{eigenvalues, min_real_eig_sym_part, sym_part};
pub use lu::{inverse, lu_solve, Lu};
pub use svd::{nuclear_norm, singular_values, spectral_norm, svd, svt, truncate, SvdFactors};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumError {
    #[error("matrix is singular to working precision (pivot {pivot:e} at column {column})")]
    SingularMatrix { column: usize, pivot: f64 },
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{0} did not converge")]
    NoConvergence(&'static str),
    #[error("csv: {0}")]
    Csv(String),
}

/// Maximum absolute row sum.
pub fn inf_norm(a: &crate::Mat) -> f64 {
    a.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}
