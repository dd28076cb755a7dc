//! Newton-Raphson AC power flow and Jacobian assembly.

mod jacobian;
mod newton;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netmodel::{AdmittanceMatrix, CaseError};
use crate::numkit::NumError;
use crate::C64;

pub use jacobian::{assemble_jacobian, finite_difference_jacobian, full_jacobian, JacobianBlocks};
pub use newton::{solve_from, solve_newton_raphson, Schedule, SolveOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerFlowError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(
        "Newton-Raphson did not converge after {} iterations (mismatch {:e})",
        point.iterations,
        point.mismatch_norm
    )]
    NoConvergence { point: Box<OperatingPoint> },
    #[error("power flow Jacobian is singular: {0}")]
    SingularJacobian(NumError),
    #[error("finite-difference step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error(transparent)]
    Case(#[from] CaseError),
}

/// Which buses span the rows and columns of the Jacobian blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BusSet {
    /// PQ buses only; slack and PV phasors are held fixed.
    #[default]
    Pq,
    /// Classical Newton-Raphson variables (non-slack angles, PQ magnitudes)
    /// with the PV-bus angles eliminated, leaving square PQ blocks that map
    /// PQ injections to PQ states with PV active powers held.
    Nonslack,
    /// Every bus, slack included; the unreduced partial derivatives.
    All,
}

impl fmt::Display for BusSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BusSet::Pq => "pq",
            BusSet::Nonslack => "nonslack",
            BusSet::All => "all",
        })
    }
}

impl FromStr for BusSet {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pq" => Ok(BusSet::Pq),
            "nonslack" => Ok(BusSet::Nonslack),
            "all" => Ok(BusSet::All),
            other => Err(format!("unknown bus set `{other}` (expected pq, nonslack or all)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    /// pu
    pub v: Vec<f64>,
    /// radians
    pub theta: Vec<f64>,
    /// pu, computed from the solved state
    pub p_inj: Vec<f64>,
    pub q_inj: Vec<f64>,
    pub converged: bool,
    pub mismatch_norm: f64,
    pub iterations: usize,
}

impl OperatingPoint {
    pub fn n_bus(&self) -> usize {
        self.v.len()
    }

    pub fn phasors(&self) -> Vec<C64> {
        self.v.iter().zip(&self.theta).map(|(&v, &t)| C64::from_polar(v, t)).collect()
    }

    /// A point at the given state with injections evaluated from it.
    pub fn at_state(y: &AdmittanceMatrix, v: Vec<f64>, theta: Vec<f64>) -> Self {
        let (p_inj, q_inj) = injections(y, &v, &theta);
        OperatingPoint { v, theta, p_inj, q_inj, converged: false, mismatch_norm: f64::NAN, iterations: 0 }
    }
}

/// Calculated injections p_i = v_i Σ_k v_k (G_ik cos θ_ik + B_ik sin θ_ik),
/// q_i = v_i Σ_k v_k (G_ik sin θ_ik − B_ik cos θ_ik).
pub fn injections(y: &AdmittanceMatrix, v: &[f64], theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = y.n_bus;
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for i in 0..n {
        let (mut sp, mut sq) = (0.0, 0.0);
        for k in 0..n {
            let (g, b) = (y.g[(i, k)], y.b[(i, k)]);
            if g == 0.0 && b == 0.0 {
                continue;
            }
            let (s, c) = (theta[i] - theta[k]).sin_cos();
            sp += v[k] * (g * c + b * s);
            sq += v[k] * (g * s - b * c);
        }
        p[i] = v[i] * sp;
        q[i] = v[i] * sq;
    }
    (p, q)
}

/// Scheduled minus calculated injections.
pub fn power_mismatch(
    y: &AdmittanceMatrix,
    v: &[f64],
    theta: &[f64],
    p_sched: &[f64],
    q_sched: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), PowerFlowError> {
    let n = y.n_bus;
    for (name, len) in [("v", v.len()), ("theta", theta.len()), ("p_sched", p_sched.len()), ("q_sched", q_sched.len())]
    {
        if len != n {
            return Err(PowerFlowError::DimensionMismatch(format!("{name} has length {len}, network has {n} buses")));
        }
    }
    let (p, q) = injections(y, v, theta);
    let dp = p_sched.iter().zip(&p).map(|(s, c)| s - c).collect();
    let dq = q_sched.iter().zip(&q).map(|(s, c)| s - c).collect();
    Ok((dp, dq))
}
