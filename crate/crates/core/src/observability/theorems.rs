use serde::{Deserialize, Serialize};

use super::{k_inverse, k_of_alpha, ObservabilityError, PowerFactorProfile};
use crate::numkit::{eigenvalues, min_real_eig_sym_part, spectral_norm, svd, Lu};
use crate::powerflow::JacobianBlocks;
use crate::sensitivity::MAX_CONDITION;
use crate::Mat;

/// Strictness margin for "≻ 0" on the symmetric part.
pub const PD_TOL: f64 = 1e-10;

/// Quantities of the Neumann-series sufficient condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1 {
    pub min_eig_dp_dtheta: f64,
    pub assumption1_dp_dtheta_pd: bool,
    pub jacobian_invertible: bool,
    pub lambda_min_sigma: f64,
    pub lambda_min_eig: f64,
    pub m_pd: bool,
    pub value_neumann: f64,
    pub bound_strict: f64,
    pub thm1_holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem2 {
    pub min_eig_s_dagger: f64,
    pub min_eig_s_ddagger: f64,
    pub thm2_holds: bool,
}

/// M = k_max·dp_dθ − dq_dθ, ΔK = k_max·I − |K|;
/// value = ‖M⁻¹·ΔK·dp_dθ‖₂ and bound = ‖M⁻¹‖₂⁻¹·‖dp_dθ‖₂⁻¹.
pub fn theorem1_check(j: &JacobianBlocks, profile: &PowerFactorProfile) -> Result<Theorem1, ObservabilityError> {
    let n = j.n();
    if profile.n() != n {
        return Err(crate::numkit::NumError::DimensionMismatch(format!(
            "profile covers {} buses, Jacobian blocks {n}",
            profile.n()
        ))
        .into());
    }
    let min_eig_dp_dtheta = min_real_eig_sym_part(&j.dp_dtheta)?;
    let full = j.assemble();
    let jsig = svd(&full).sigma;
    let lambda_min_sigma = jsig.last().copied().unwrap_or(f64::NAN);
    let condition = jsig.first().copied().unwrap_or(f64::NAN) / lambda_min_sigma;
    let lambda_min_eig = eigenvalues(&full)?.iter().map(|e| e.norm()).fold(f64::INFINITY, f64::min);
    let jacobian_invertible = condition <= MAX_CONDITION;

    let k_abs = profile.k_abs();
    let k_max = profile.k_max;
    let m = k_max * &j.dp_dtheta - &j.dq_dtheta;
    let m_pd = min_real_eig_sym_part(&m)? > PD_TOL;
    let m_inv = Lu::factor(&m).map_err(|_| ObservabilityError::SingularM)?.inverse();
    let delta = Mat::from_diagonal(&nalgebra::DVector::from_iterator(n, k_abs.iter().map(|k| k_max - k)));
    let value_neumann = spectral_norm(&(&m_inv * delta * &j.dp_dtheta));
    let bound_strict = 1.0 / (spectral_norm(&m_inv) * spectral_norm(&j.dp_dtheta));

    let assumption1_dp_dtheta_pd = min_eig_dp_dtheta > PD_TOL;
    Ok(Theorem1 {
        min_eig_dp_dtheta,
        assumption1_dp_dtheta_pd,
        jacobian_invertible,
        lambda_min_sigma,
        lambda_min_eig,
        m_pd,
        value_neumann,
        bound_strict,
        thm1_holds: assumption1_dp_dtheta_pd && jacobian_invertible && value_neumann < 1.0,
    })
}

/// S† = s_v_p + s_v_q·K.
pub fn s_dagger(s_v_p: &Mat, s_v_q: &Mat, k: &Mat) -> Mat {
    s_v_p + s_v_q * k
}

/// S‡ = s_v_p·K⁻¹ + s_v_q, K diagonal.
pub fn s_ddagger(s_v_p: &Mat, s_v_q: &Mat, k: &Mat) -> Result<Mat, ObservabilityError> {
    let mut k_inv = Mat::zeros(k.nrows(), k.ncols());
    for i in 0..k.nrows() {
        if k[(i, i)] == 0.0 {
            return Err(ObservabilityError::SingularK(i));
        }
        k_inv[(i, i)] = 1.0 / k[(i, i)];
    }
    Ok(s_v_p * k_inv + s_v_q)
}

/// λ_min of the symmetric parts; holds when S† ≻ 0. A missing S‡ (singular
/// K) reports NaN.
pub fn theorem2_check(s_dag: &Mat, s_ddag: Option<&Mat>) -> Result<Theorem2, ObservabilityError> {
    let min_eig_s_dagger = min_real_eig_sym_part(s_dag)?;
    let min_eig_s_ddagger = match s_ddag {
        Some(m) => min_real_eig_sym_part(m)?,
        None => f64::NAN,
    };
    Ok(Theorem2 { min_eig_s_dagger, min_eig_s_ddagger, thm2_holds: min_eig_s_dagger > PD_TOL })
}

/// α_min(α_max) = k⁻¹(k(α_max) + Δk_max) over the grid.
pub fn alpha_min_curve_for(delta_k_max: f64, alpha_max_grid: &[f64]) -> Result<Vec<(f64, f64)>, ObservabilityError> {
    alpha_max_grid.iter().map(|&a| Ok((a, k_inverse(k_of_alpha(a)? + delta_k_max)))).collect()
}

/// The curve with Δk_max = bound_strict at the operating point.
pub fn alpha_min_curve(
    j: &JacobianBlocks,
    profile: &PowerFactorProfile,
    alpha_max_grid: &[f64],
) -> Result<Vec<(f64, f64)>, ObservabilityError> {
    let t1 = theorem1_check(j, profile)?;
    alpha_min_curve_for(t1.bound_strict, alpha_max_grid)
}
