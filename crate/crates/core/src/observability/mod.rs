//! Power-factor encoding, the Neumann-series sufficient condition, the
//! eigenvalue condition for phaseless recovery and the feasible power-factor
//! curve.

mod report;
mod theorems;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numkit::NumError;
use crate::powerflow::PowerFlowError;
use crate::sensitivity::SensitivityError;
use crate::Mat;

pub use report::{check_case, report_csv, report_human, report_table, ObservabilityReport, CSV_HEADER};
pub use theorems::{
    alpha_min_curve, alpha_min_curve_for, s_dagger, s_ddagger, theorem1_check, theorem2_check, Theorem1, Theorem2,
    PD_TOL,
};

/// Apparent power below which a bus counts as a zero injection (pu).
pub const ZERO_INJECTION_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservabilityError {
    #[error("power factor {0} is outside (0, 1]")]
    DomainError(f64),
    #[error("every bus is a zero injection; nothing to impute from")]
    AllZeroInjections,
    #[error("K has a zero diagonal entry at position {0}")]
    SingularK(usize),
    #[error("M = k_max·dp_dθ − dq_dθ is singular")]
    SingularM,
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    PowerFlow(#[from] PowerFlowError),
    #[error(transparent)]
    Sensitivity(#[from] SensitivityError),
}

/// k(α) = √(1−α²)/α, the positive branch.
pub fn k_of_alpha(alpha: f64) -> Result<f64, ObservabilityError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(ObservabilityError::DomainError(alpha));
    }
    Ok((1.0 - alpha * alpha).sqrt() / alpha)
}

/// k⁻¹(k) = √(1/(k²+1)).
pub fn k_inverse(k: f64) -> f64 {
    (1.0 / (k * k + 1.0)).sqrt()
}

/// Power factors α_i = |p_i|/|s_i| and the signs that make q_i = K_ii·p_i.
/// Buses whose apparent power is below `ZERO_INJECTION_TOL`, or with no
/// active power at all, get a NaN marker.
pub fn power_factors(p: &[f64], q: &[f64]) -> (Vec<f64>, Vec<f64>) {
    p.iter()
        .zip(q)
        .map(|(&p, &q)| {
            let s = p.hypot(q);
            let alpha = if s < ZERO_INJECTION_TOL || p == 0.0 { f64::NAN } else { p.abs() / s };
            let sign = if p * q < 0.0 { -1.0 } else { 1.0 };
            (alpha, sign)
        })
        .unzip()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFactorProfile {
    /// NaN marks a zero injection awaiting imputation
    pub alpha: Vec<f64>,
    pub signs: Vec<f64>,
    /// signed K_ii, NaN at markers
    pub k_diag: Vec<f64>,
    /// over |K_ii|
    pub k_min: f64,
    pub k_max: f64,
    pub delta_k: f64,
    /// leading and lagging buses both present
    pub mixed_sign: bool,
    /// positions (within the profile) that were imputed
    pub zero_injection_buses: Vec<usize>,
}

impl PowerFactorProfile {
    pub fn from_injections(p: &[f64], q: &[f64]) -> Self {
        let (alpha, signs) = power_factors(p, q);
        let k_diag =
            alpha.iter().zip(p.iter().zip(q)).map(|(a, (&p, &q))| if a.is_nan() { f64::NAN } else { q / p }).collect();
        let mut out = PowerFactorProfile {
            alpha,
            signs,
            k_diag,
            k_min: f64::NAN,
            k_max: f64::NAN,
            delta_k: f64::NAN,
            mixed_sign: false,
            zero_injection_buses: vec![],
        };
        out.refresh();
        out
    }

    /// Uniform power factor at every bus, with sign +1.
    pub fn uniform(n: usize, alpha: f64) -> Result<Self, ObservabilityError> {
        let k = k_of_alpha(alpha)?;
        let mut out = PowerFactorProfile {
            alpha: vec![alpha; n],
            signs: vec![1.0; n],
            k_diag: vec![k; n],
            k_min: f64::NAN,
            k_max: f64::NAN,
            delta_k: f64::NAN,
            mixed_sign: false,
            zero_injection_buses: vec![],
        };
        out.refresh();
        Ok(out)
    }

    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    pub fn markers(&self) -> Vec<usize> {
        (0..self.n()).filter(|&k| self.k_diag[k].is_nan()).collect()
    }

    /// |K_ii|, the positive branch used by the theorem checks.
    pub fn k_abs(&self) -> Vec<f64> {
        self.k_diag.iter().map(|k| k.abs()).collect()
    }

    pub fn alpha_range(&self) -> (f64, f64) {
        let vals = self.alpha.iter().copied().filter(|a| !a.is_nan());
        let lo = vals.clone().fold(f64::INFINITY, f64::min);
        let hi = vals.fold(f64::NEG_INFINITY, f64::max);
        if lo.is_finite() {
            (lo, hi)
        } else {
            (f64::NAN, f64::NAN)
        }
    }

    fn refresh(&mut self) {
        let known: Vec<f64> = self.k_diag.iter().copied().filter(|k| !k.is_nan()).collect();
        if known.is_empty() {
            self.k_min = f64::NAN;
            self.k_max = f64::NAN;
            self.delta_k = f64::NAN;
            self.mixed_sign = false;
            return;
        }
        self.k_min = known.iter().map(|k| k.abs()).fold(f64::INFINITY, f64::min);
        self.k_max = known.iter().map(|k| k.abs()).fold(0.0, f64::max);
        self.delta_k = self.k_max - self.k_min;
        self.mixed_sign = known.iter().any(|&k| k > 0.0) && known.iter().any(|&k| k < 0.0);
    }
}

/// Replaces every marked entry with the mean of the unmarked |K_ii| (sign +1)
/// and refreshes the statistics.
pub fn preprocess_zero_injections(profile: &PowerFactorProfile) -> Result<PowerFactorProfile, ObservabilityError> {
    let markers = profile.markers();
    if markers.is_empty() {
        return Ok(profile.clone());
    }
    let known: Vec<f64> = profile.k_diag.iter().filter(|k| !k.is_nan()).map(|k| k.abs()).collect();
    if known.is_empty() {
        return Err(ObservabilityError::AllZeroInjections);
    }
    let mean = known.iter().sum::<f64>() / known.len() as f64;
    let mut out = profile.clone();
    for &k in &markers {
        out.k_diag[k] = mean;
        out.signs[k] = 1.0;
        out.alpha[k] = k_inverse(mean);
    }
    out.zero_injection_buses = markers;
    out.refresh();
    Ok(out)
}

/// diag(K_ii), signed.
pub fn build_k(profile: &PowerFactorProfile) -> Mat {
    Mat::from_diagonal(&nalgebra::DVector::from_column_slice(&profile.k_diag))
}

/// diag(|K_ii|), the positive branch.
pub fn build_k_abs(profile: &PowerFactorProfile) -> Mat {
    Mat::from_diagonal(&nalgebra::DVector::from_vec(profile.k_abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_four_five() {
        let (a, s) = power_factors(&[3.0, 1.0, 0.0, -2.0], &[4.0, 0.0, 0.0, 1.0]);
        assert!((a[0] - 0.6).abs() < 1e-15);
        assert_eq!(a[1], 1.0);
        assert!(a[2].is_nan());
        assert_eq!(s, vec![1.0, 1.0, 1.0, -1.0]);
        let prof = PowerFactorProfile::from_injections(&[3.0, 1.0, -2.0], &[4.0, 0.0, 1.0]);
        assert!((prof.k_diag[0] - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(prof.k_diag[1], 0.0);
        assert_eq!(prof.k_diag[2], -0.5);
        assert!(prof.mixed_sign);
        assert!((prof.delta_k - 4.0 / 3.0).abs() < 1e-15);
        // q = K·p holds exactly by construction
        assert_eq!(prof.k_diag[2] * -2.0, 1.0);
    }

    #[test]
    fn k_analytics() {
        assert!((k_of_alpha(std::f64::consts::FRAC_1_SQRT_2).unwrap() - 1.0).abs() < 1e-15);
        assert!((k_of_alpha(0.894).unwrap() - 0.5).abs() < 2e-3);
        assert!((k_inverse(k_of_alpha(0.8).unwrap()) - 0.8).abs() < 1e-12);
        assert_eq!(k_of_alpha(1.0).unwrap(), 0.0);
        assert_eq!(k_of_alpha(0.0), Err(ObservabilityError::DomainError(0.0)));
        assert_eq!(k_of_alpha(1.5), Err(ObservabilityError::DomainError(1.5)));
        assert_eq!(k_inverse(0.0), 1.0);
    }

    #[test]
    fn imputation_rule() {
        let prof = PowerFactorProfile {
            alpha: vec![k_inverse(0.5), f64::NAN, k_inverse(0.3)],
            signs: vec![1.0, 1.0, -1.0],
            k_diag: vec![0.5, f64::NAN, -0.3],
            k_min: f64::NAN,
            k_max: f64::NAN,
            delta_k: f64::NAN,
            mixed_sign: false,
            zero_injection_buses: vec![],
        };
        let out = preprocess_zero_injections(&prof).unwrap();
        assert_eq!(out.k_diag, vec![0.5, 0.4, -0.3]);
        assert_eq!(out.zero_injection_buses, vec![1]);
        assert!((out.k_max - 0.5).abs() < 1e-15 && (out.k_min - 0.3).abs() < 1e-15);

        let none = PowerFactorProfile::uniform(3, 0.9).unwrap();
        assert_eq!(preprocess_zero_injections(&none).unwrap(), none);

        let all = PowerFactorProfile::from_injections(&[0.0, 0.0], &[0.0, 0.0]);
        assert_eq!(preprocess_zero_injections(&all), Err(ObservabilityError::AllZeroInjections));
    }
}
