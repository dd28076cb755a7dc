//! Power-flow Jacobians, voltage-magnitude sensitivity matrices and
//! phaseless observability of complex power injections.
//!
//! The crate is organised bottom-up:
//!
//! - [`netmodel`]: MATPOWER / JSON case ingestion and the bus admittance matrix.
//! - [`numkit`]: dense linear-algebra kernels (LU, SVD, eigenvalues, SVT, CSV I/O).
//! - [`powerflow`]: Newton-Raphson AC power flow and Jacobian assembly.
//! - [`sensitivity`]: voltage sensitivities by inverse Jacobian, Schur
//!   complement, phasor linear systems and perturb-and-observe.
//! - [`observability`]: power-factor encoding, the Neumann-series sufficient
//!   condition, the eigenvalue condition and the feasible power-factor curve.
//! - [`estimation`]: phaseless injection recovery and Tikhonov regression.
//! - [`lowrank`]: truncated SVD, matrix completion and the online estimator.
//! - [`amisim`]: synthetic AMI time series.

// NaN must fail these parameter checks, so `!(x >= 0.0)` is intended.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amisim;
pub mod estimation;
pub mod lowrank;
pub mod netmodel;
pub mod numkit;
pub mod observability;
pub mod powerflow;
pub mod sensitivity;

mod error;

pub use error::Error;

/// Dense real matrix used throughout the crate.
pub type Mat = nalgebra::DMatrix<f64>;
/// Dense real column vector.
pub type Vector = nalgebra::DVector<f64>;
pub use nalgebra::Complex;
/// Double precision complex scalar.
pub type C64 = Complex<f64>;
