//! Phaseless recovery of injection perturbations from voltage magnitudes and
//! least-squares fits of the wide sensitivity matrix from AMI differences.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amisim::{AmiSeries, SimError};
use crate::netmodel::{build_admittance, BusKind, NetworkCase};
use crate::numkit::{Lu, NumError};
use crate::observability::{build_k, preprocess_zero_injections, s_dagger, ObservabilityError, PowerFactorProfile};
use crate::powerflow::{assemble_jacobian, solve_newton_raphson, BusSet, SolveOptions};
use crate::sensitivity::{invert_jacobian, SensitivityError};
use crate::{Mat, Vector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("need at least two samples, got {0}")]
    TooShort(usize),
    #[error("S† is singular")]
    SingularSDagger,
    #[error("the two sensitivity columns are linearly dependent")]
    RankDeficient,
    #[error("normal equations are singular; use λ > 0 or more samples")]
    SingularNormalEquations,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Series(#[from] SimError),
    #[error(transparent)]
    Observability(#[from] ObservabilityError),
    #[error(transparent)]
    Sensitivity(#[from] SensitivityError),
}

/// Row t holds sample t+1 − sample t. `dx` = [dP | dQ].
#[derive(Debug, Clone, PartialEq)]
pub struct AmiDeltas {
    pub dv: Mat,
    pub dp: Mat,
    pub dq: Mat,
    pub dx: Mat,
}

impl AmiDeltas {
    pub fn rows(&self) -> usize {
        self.dv.nrows()
    }

    pub fn n(&self) -> usize {
        self.dv.ncols()
    }
}

fn diff(x: &Mat) -> Mat {
    let m = x.nrows();
    x.rows(1, m - 1) - x.rows(0, m - 1)
}

pub fn finite_differences(series: &AmiSeries) -> Result<AmiDeltas, EstimationError> {
    if series.m < 2 {
        return Err(EstimationError::TooShort(series.m));
    }
    let dv = diff(&series.v);
    let dp = diff(&series.p);
    let dq = diff(&series.q);
    let mut dx = Mat::zeros(dp.nrows(), 2 * series.n);
    dx.columns_mut(0, series.n).copy_from(&dp);
    dx.columns_mut(series.n, series.n).copy_from(&dq);
    Ok(AmiDeltas { dv, dp, dq, dx })
}

/// dp = S†⁻¹·dv, dq = K·dp.
pub fn estimate_injections_phaseless(
    s_dag: &Mat,
    k: &Mat,
    dv: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), EstimationError> {
    let lu = Lu::factor(s_dag).map_err(|_| EstimationError::SingularSDagger)?;
    let dp = lu.solve_vec(dv).map_err(|e| EstimationError::DimensionMismatch(e.to_string()))?;
    let dq = k * Vector::from_column_slice(&dp);
    Ok((dp, dq.as_slice().to_vec()))
}

/// Row-wise version for a whole m′×n block of voltage differences, one
/// factorization.
pub fn estimate_series_phaseless(s_dag: &Mat, k: &Mat, dv: &Mat) -> Result<(Mat, Mat), EstimationError> {
    let lu = Lu::factor(s_dag).map_err(|_| EstimationError::SingularSDagger)?;
    let dp = lu.solve(&dv.transpose()).map_err(|e| EstimationError::DimensionMismatch(e.to_string()))?;
    let dq = k * &dp;
    Ok((dp.transpose(), dq.transpose()))
}

/// Least squares for one perturbed bus from its two sensitivity columns.
pub fn single_bus_lsq(s_perp: &Mat, dv: &[f64]) -> Result<(f64, f64), EstimationError> {
    if s_perp.ncols() != 2 || s_perp.nrows() != dv.len() {
        return Err(EstimationError::DimensionMismatch(format!(
            "columns {}×{} against {} measurements",
            s_perp.nrows(),
            s_perp.ncols(),
            dv.len()
        )));
    }
    let gram = s_perp.transpose() * s_perp;
    let (aa, bb) = (gram[(0, 0)], gram[(1, 1)]);
    if !(gram.determinant() > 1e-13 * aa * bb) {
        return Err(EstimationError::RankDeficient);
    }
    let rhs = s_perp.transpose() * Vector::from_column_slice(dv);
    let x =
        Lu::factor(&gram).and_then(|lu| lu.solve_vec(rhs.as_slice())).map_err(|_| EstimationError::RankDeficient)?;
    Ok((x[0], x[1]))
}

/// 1e-8·trace(dXᵀdX)/2n.
pub fn default_ridge(deltas: &AmiDeltas) -> f64 {
    1e-8 * deltas.dx.norm_squared() / deltas.dx.ncols() as f64
}

/// S̃ᵀ = (dXᵀdX + λI)⁻¹dXᵀdV; `None` picks the default ridge. Returns S̃ (n×2n).
pub fn tikhonov_fit(deltas: &AmiDeltas, lambda: Option<f64>) -> Result<Mat, EstimationError> {
    if deltas.rows() < 1 {
        return Err(EstimationError::TooShort(deltas.rows() + 1));
    }
    let lambda = lambda.unwrap_or_else(|| default_ridge(deltas));
    let w = deltas.dx.ncols();
    let gram = deltas.dx.transpose() * &deltas.dx + Mat::identity(w, w) * lambda;
    let lu = Lu::factor(&gram).map_err(|e| match e {
        NumError::SingularMatrix { .. } => EstimationError::SingularNormalEquations,
        other => EstimationError::DimensionMismatch(other.to_string()),
    })?;
    let st = lu
        .solve(&(deltas.dx.transpose() * &deltas.dv))
        .map_err(|e| EstimationError::DimensionMismatch(e.to_string()))?;
    Ok(st.transpose())
}

/// ‖dX·Sᵀ − dV‖_F² + λ‖S‖_F².
pub fn tikhonov_objective(deltas: &AmiDeltas, s: &Mat, lambda: f64) -> f64 {
    (&deltas.dx * s.transpose() - &deltas.dv).norm_squared() + lambda * s.norm_squared()
}

/// Root-mean-square error of each column.
pub fn per_bus_rmse(estimate: &Mat, truth: &Mat) -> Vec<f64> {
    let m = estimate.nrows().max(1) as f64;
    (0..estimate.ncols()).map(|c| ((estimate.column(c) - truth.column(c)).norm_squared() / m).sqrt()).collect()
}

/// Result of running phaseless estimation over a recorded series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub case: String,
    pub bus_set: BusSet,
    pub steps: usize,
    pub buses: Vec<i64>,
    pub k_diag: Vec<f64>,
    pub rmse_p: Vec<f64>,
    pub rmse_q: Vec<f64>,
    pub overall_rmse_p: f64,
    pub overall_rmse_q: f64,
    /// ‖Ŝ − S̃‖_F/‖S̃‖_F of the ridge fit, when there are at least 2n differences
    pub s_wide_rel_error: Option<f64>,
    pub dp_hat: Vec<Vec<f64>>,
    pub dq_hat: Vec<Vec<f64>>,
}

/// Sensitivities and K at the case's own operating point, then per-step
/// phaseless estimates compared with the recorded injection differences.
/// `BusSet::Nonslack` lets PV angles respond, which is what measured data do;
/// `BusSet::Pq` holds them fixed.
pub fn estimate_from_series(
    case: &NetworkCase,
    series: &AmiSeries,
    bus_set: BusSet,
) -> Result<EstimationReport, EstimationError> {
    if bus_set == BusSet::All {
        return Err(EstimationError::DimensionMismatch("AMI series cover PQ buses only; use pq or nonslack".into()));
    }
    let positions = series.bus_positions(case)?;
    let pq = case.pq_indices();
    if positions.len() != pq.len() {
        return Err(EstimationError::DimensionMismatch(format!(
            "series has {} buses, case has {} PQ buses",
            positions.len(),
            pq.len()
        )));
    }
    // column c of the series ↔ position order[c] in the PQ ordering
    let order: Vec<usize> = positions.iter().map(|p| pq.iter().position(|k| k == p).expect("pq")).collect();
    let y = build_admittance(case).map_err(crate::powerflow::PowerFlowError::from).map_err(SensitivityError::from)?;
    let point = solve_newton_raphson(case, &SolveOptions::default()).map_err(SensitivityError::from)?;
    let j = assemble_jacobian(case, &y, &point, bus_set).map_err(SensitivityError::from)?;
    let s = invert_jacobian(&j)?;
    let (p_sched, q_sched) = case.scheduled_injections();
    debug_assert!(j.buses.iter().all(|&k| case.buses[k].kind == BusKind::Pq));
    let p: Vec<f64> = j.buses.iter().map(|&k| p_sched[k]).collect();
    let q: Vec<f64> = j.buses.iter().map(|&k| q_sched[k]).collect();
    let profile = preprocess_zero_injections(&PowerFactorProfile::from_injections(&p, &q))?;
    let k = build_k(&profile);
    let sd = s_dagger(&s.s_v_p, &s.s_v_q, &k);

    let deltas = finite_differences(series)?;
    let n = series.n;
    let permute = |x: &Mat| {
        let mut out = Mat::zeros(x.nrows(), n);
        for (c, &o) in order.iter().enumerate() {
            out.set_column(o, &x.column(c));
        }
        out
    };
    let dv = permute(&deltas.dv);
    let dp = permute(&deltas.dp);
    let dq = permute(&deltas.dq);
    let (dp_hat, dq_hat) = estimate_series_phaseless(&sd, &k, &dv)?;
    let rmse = |e: &Mat, t: &Mat| -> (Vec<f64>, f64) {
        let per = per_bus_rmse(e, t);
        let overall = ((e - t).norm_squared() / (e.len().max(1) as f64)).sqrt();
        (per, overall)
    };
    let (rmse_p, overall_rmse_p) = rmse(&dp_hat, &dp);
    let (rmse_q, overall_rmse_q) = rmse(&dq_hat, &dq);

    let s_wide_rel_error = if deltas.rows() >= 2 * n {
        let ordered = AmiDeltas {
            dx: {
                let mut dx = Mat::zeros(dv.nrows(), 2 * n);
                dx.columns_mut(0, n).copy_from(&dp);
                dx.columns_mut(n, n).copy_from(&dq);
                dx
            },
            dv: dv.clone(),
            dp: dp.clone(),
            dq: dq.clone(),
        };
        tikhonov_fit(&ordered, None).ok().map(|fit| {
            let truth = s.magnitude().wide();
            (fit - &truth).norm() / truth.norm()
        })
    } else {
        None
    };
    let rows = |x: &Mat| (0..x.nrows()).map(|r| x.row(r).iter().copied().collect()).collect();
    Ok(EstimationReport {
        case: case.name.clone(),
        bus_set,
        steps: series.m,
        buses: pq.iter().map(|&i| case.buses[i].id).collect(),
        k_diag: profile.k_diag.clone(),
        rmse_p,
        rmse_q,
        overall_rmse_p,
        overall_rmse_q,
        s_wide_rel_error,
        dp_hat: rows(&dp_hat),
        dq_hat: rows(&dq_hat),
    })
}
