//! Voltage sensitivities by inverse Jacobian, Schur complement, phasor
//! linear systems and perturb-and-observe.

mod phasor;

use thiserror::Error;

use crate::netmodel::{AdmittanceMatrix, NetworkCase};
use crate::numkit::{Lu, NumError};
use crate::powerflow::{
    assemble_jacobian, solve_from, BusSet, JacobianBlocks, OperatingPoint, PowerFlowError, Schedule, SolveOptions,
};
use crate::Mat;

pub use phasor::{
    magnitude_from_phasor, phasor_residual, phasor_sensitivities, phasor_sensitivity_matrices, PhasorSensitivity,
};

/// Inverse condition number above which J is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensitivityError {
    #[error("Jacobian is singular (condition estimate {condition:e})")]
    SingularJacobian { condition: f64 },
    #[error("block {0} is singular")]
    SingularBlock(&'static str),
    #[error(transparent)]
    SingularMatrix(NumError),
    #[error("voltage magnitude at bus position {0} is zero")]
    ZeroVoltage(usize),
    #[error("bus {0} is not a PQ bus")]
    NotPqBus(i64),
    #[error("perturbation size must be nonzero and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error(transparent)]
    PowerFlow(#[from] PowerFlowError),
}

/// Blocks of J⁻¹ and the wide matrix [s_v_p | s_v_q].
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityBlocks {
    pub s_theta_p: Mat,
    pub s_theta_q: Mat,
    pub s_v_p: Mat,
    pub s_v_q: Mat,
    pub s_wide: Mat,
    pub bus_set: BusSet,
    pub index_map: Vec<i64>,
    pub buses: Vec<usize>,
}

impl SensitivityBlocks {
    pub fn n(&self) -> usize {
        self.buses.len()
    }

    /// [[s_θ_p, s_θ_q], [s_v_p, s_v_q]]
    pub fn assemble(&self) -> Mat {
        let n = self.n();
        let mut s = Mat::zeros(2 * n, 2 * n);
        s.view_mut((0, 0), (n, n)).copy_from(&self.s_theta_p);
        s.view_mut((0, n), (n, n)).copy_from(&self.s_theta_q);
        s.view_mut((n, 0), (n, n)).copy_from(&self.s_v_p);
        s.view_mut((n, n), (n, n)).copy_from(&self.s_v_q);
        s
    }

    pub fn magnitude(&self) -> VoltageSensitivities {
        VoltageSensitivities { s_v_p: self.s_v_p.clone(), s_v_q: self.s_v_q.clone() }
    }
}

/// The magnitude rows of J⁻¹, as produced by every route.
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageSensitivities {
    pub s_v_p: Mat,
    pub s_v_q: Mat,
}

impl VoltageSensitivities {
    pub fn wide(&self) -> Mat {
        hcat(&self.s_v_p, &self.s_v_q)
    }

    pub fn max_abs_diff(&self, other: &VoltageSensitivities) -> f64 {
        (&self.s_v_p - &other.s_v_p).amax().max((&self.s_v_q - &other.s_v_q).amax())
    }
}

pub(crate) fn hcat(a: &Mat, b: &Mat) -> Mat {
    let mut out = Mat::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

fn one_norm(a: &Mat) -> f64 {
    a.column_iter().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn invert_jacobian(j: &JacobianBlocks) -> Result<SensitivityBlocks, SensitivityError> {
    let n = j.n();
    let full = j.assemble();
    let lu = Lu::factor(&full).map_err(|_| SensitivityError::SingularJacobian { condition: f64::INFINITY })?;
    let inv = lu.inverse();
    let condition = one_norm(&full) * one_norm(&inv);
    if !(condition <= MAX_CONDITION) {
        return Err(SensitivityError::SingularJacobian { condition });
    }
    let block = |r: usize, c: usize| inv.view((r * n, c * n), (n, n)).into_owned();
    let s_v_p = block(1, 0);
    let s_v_q = block(1, 1);
    Ok(SensitivityBlocks {
        s_theta_p: block(0, 0),
        s_theta_q: block(0, 1),
        s_wide: hcat(&s_v_p, &s_v_q),
        s_v_p,
        s_v_q,
        bus_set: j.bus_set,
        index_map: j.index_map.clone(),
        buses: j.buses.clone(),
    })
}

/// s_v_q = (dq_dv − dq_dθ·dp_dθ⁻¹·dp_dv)⁻¹ and s_v_p = −s_v_q·dq_dθ·dp_dθ⁻¹.
pub fn schur_sensitivities(j: &JacobianBlocks) -> Result<VoltageSensitivities, SensitivityError> {
    let pt = Lu::factor(&j.dp_dtheta).map_err(|_| SensitivityError::SingularBlock("dp_dtheta"))?;
    // dp_dθ⁻¹·dp_dv and (dq_dθ·dp_dθ⁻¹)ᵀ = dp_dθ⁻ᵀ·dq_dθᵀ
    let pt_inv_pv = pt.solve(&j.dp_dv).expect("square blocks");
    let schur = &j.dq_dv - &j.dq_dtheta * pt_inv_pv;
    let s_v_q = Lu::factor(&schur).map_err(|_| SensitivityError::SingularBlock("Schur complement"))?.inverse();
    let qt_pt_inv = Lu::factor(&j.dp_dtheta.transpose())
        .map_err(|_| SensitivityError::SingularBlock("dp_dtheta"))?
        .solve(&j.dq_dtheta.transpose())
        .expect("square blocks")
        .transpose();
    let s_v_p = -&s_v_q * qt_pt_inv;
    Ok(VoltageSensitivities { s_v_p, s_v_q })
}

/// Assembles J at `point` and inverts it.
pub fn sensitivities(
    case: &NetworkCase,
    y: &AdmittanceMatrix,
    point: &OperatingPoint,
    bus_set: BusSet,
) -> Result<SensitivityBlocks, SensitivityError> {
    invert_jacobian(&assemble_jacobian(case, y, point, bus_set)?)
}

/// Schedule that reproduces `point` exactly: its own injections, with its
/// magnitudes as setpoints on voltage-controlled buses.
pub fn schedule_at(point: &OperatingPoint) -> Schedule {
    Schedule { p: point.p_inj.clone(), q: point.q_inj.clone(), v_set: point.v.clone() }
}

/// Empirical sensitivities over the PQ buses: column l is
/// (v(+eps at bus l) − v)/eps, each perturbed case re-solved from `point`.
/// PV buses keep their magnitude and active power, as in the `nonslack` set.
pub fn perturb_and_observe(
    case: &NetworkCase,
    y: &AdmittanceMatrix,
    point: &OperatingPoint,
    eps: f64,
) -> Result<VoltageSensitivities, SensitivityError> {
    if eps == 0.0 || !eps.is_finite() {
        return Err(SensitivityError::InvalidEpsilon(eps));
    }
    let opts = SolveOptions { tol: 1e-13, max_iter: 30, flat_start: false };
    let sched = schedule_at(point);
    let base = solve_from(case, y, &sched, Some(point), &opts)?;
    let pq = case.pq_indices();
    let n = pq.len();
    let mut s_v_p = Mat::zeros(n, n);
    let mut s_v_q = Mat::zeros(n, n);
    for (c, &l) in pq.iter().enumerate() {
        for reactive in [false, true] {
            let mut s = sched.clone();
            if reactive {
                s.q[l] += eps;
            } else {
                s.p[l] += eps;
            }
            let pert = solve_from(case, y, &s, Some(&base), &opts)?;
            let target = if reactive { &mut s_v_q } else { &mut s_v_p };
            for (r, &i) in pq.iter().enumerate() {
                target[(r, c)] = (pert.v[i] - base.v[i]) / eps;
            }
        }
    }
    Ok(VoltageSensitivities { s_v_p, s_v_q })
}

/// Pairs (i, l) where the complex sensitivity s_v_p[i,l] + j·s_v_q[i,l]
/// fails to be distinct: equal parts, or a vanishing part.
#[derive(Debug, Clone, PartialEq)]
pub struct DistinctnessReport {
    pub checked: usize,
    pub violations: Vec<(usize, usize)>,
}

pub fn distinctness_check(s_v_p: &Mat, s_v_q: &Mat, tol: f64) -> DistinctnessReport {
    let mut violations = Vec::new();
    for i in 0..s_v_p.nrows() {
        for l in 0..s_v_p.ncols() {
            let (a, b) = (s_v_p[(i, l)], s_v_q[(i, l)]);
            if (a - b).abs() <= tol || a.abs() <= tol || b.abs() <= tol {
                violations.push((i, l));
            }
        }
    }
    DistinctnessReport { checked: s_v_p.len(), violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{build_admittance, parse_matpower_case};
    use crate::powerflow::solve_newton_raphson;

    fn solved(text: &str) -> (NetworkCase, AdmittanceMatrix, OperatingPoint) {
        let case = parse_matpower_case(text).unwrap();
        let y = build_admittance(&case).unwrap();
        let point = solve_newton_raphson(&case, &SolveOptions::default()).unwrap();
        (case, y, point)
    }

    fn blocks(n: usize, a: Mat, b: Mat, c: Mat, d: Mat) -> JacobianBlocks {
        JacobianBlocks {
            dp_dtheta: a,
            dp_dv: b,
            dq_dtheta: c,
            dq_dv: d,
            bus_set: BusSet::Pq,
            index_map: (1..=n as i64).collect(),
            buses: (0..n).collect(),
        }
    }

    #[test]
    fn identity_blocks_invert_to_identity() {
        let i = Mat::identity(3, 3);
        let z = Mat::zeros(3, 3);
        let s = invert_jacobian(&blocks(3, i.clone(), z.clone(), z.clone(), i.clone())).unwrap();
        assert_eq!(s.s_theta_p, i);
        assert_eq!(s.s_v_q, i);
        assert_eq!(s.s_v_p, z);
        assert_eq!(s.s_wide.shape(), (3, 6));
    }

    #[test]
    fn duplicated_rows_are_singular() {
        let mut a = Mat::identity(2, 2);
        a.set_row(1, &a.row(0).clone_owned());
        let mut c = Mat::identity(2, 2);
        c.set_row(1, &c.row(0).clone_owned());
        let j = blocks(2, a.clone(), c.clone(), c, a);
        assert!(matches!(invert_jacobian(&j), Err(SensitivityError::SingularJacobian { .. })));
        assert_eq!(schur_sensitivities(&j), Err(SensitivityError::SingularBlock("dp_dtheta")));
    }

    #[test]
    fn diagonal_schur_closed_form() {
        let d = |x: f64| Mat::from_diagonal_element(1, 1, x);
        let j = blocks(1, d(4.0), d(1.0), d(2.0), d(3.0));
        let s = schur_sensitivities(&j).unwrap();
        // s_v_q = 1/(3 − 2·1/4), s_v_p = −s_v_q·2/4
        assert!((s.s_v_q[(0, 0)] - 0.4).abs() < 1e-15);
        assert!((s.s_v_p[(0, 0)] + 0.2).abs() < 1e-15);
    }

    #[test]
    fn case9_inverse_and_schur_agree() {
        let (case, y, point) = solved(include_str!("../../../../cases/case9.m"));
        for set in [BusSet::Pq, BusSet::Nonslack] {
            let j = assemble_jacobian(&case, &y, &point, set).unwrap();
            let s = invert_jacobian(&j).unwrap();
            assert!((s.assemble() * j.assemble() - Mat::identity(12, 12)).amax() < 1e-8);
            let sc = schur_sensitivities(&j).unwrap();
            assert!(s.magnitude().max_abs_diff(&sc) < 1e-8);
        }
    }

    #[test]
    fn perturb_matches_nonslack_inverse_case9() {
        let (case, y, point) = solved(include_str!("../../../../cases/case9.m"));
        let s = sensitivities(&case, &y, &point, BusSet::Nonslack).unwrap();
        let emp = perturb_and_observe(&case, &y, &point, 1e-5).unwrap();
        assert!(s.magnitude().max_abs_diff(&emp) < 1e-4);
        // forward differences flip their O(eps) bias with the sign of eps
        let back = perturb_and_observe(&case, &y, &point, -1e-5).unwrap();
        let central =
            VoltageSensitivities { s_v_p: (&emp.s_v_p + &back.s_v_p) / 2.0, s_v_q: (&emp.s_v_q + &back.s_v_q) / 2.0 };
        assert!(s.magnitude().max_abs_diff(&central) < s.magnitude().max_abs_diff(&emp));
        assert!(emp.max_abs_diff(&back) < 1e-3);
        assert_eq!(perturb_and_observe(&case, &y, &point, 0.0), Err(SensitivityError::InvalidEpsilon(0.0)));
    }

    #[test]
    fn distinctness_boundaries() {
        let a = Mat::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert!(distinctness_check(&a, &a, 1e-9).violations.len() == 4);
        assert!(distinctness_check(&a, &(&a * 2.0), f64::INFINITY).violations.len() == 4);
        assert!(distinctness_check(&a, &(&a * 2.0), 1e-9).violations.is_empty());
    }
}
