use super::{SensitivityError, VoltageSensitivities};
use crate::netmodel::{AdmittanceMatrix, BusKind, NetworkCase};
use crate::numkit::Lu;
use crate::powerflow::OperatingPoint;
use crate::{Mat, C64};

/// Complex voltage sensitivities ∂v̄_i/∂p_l and ∂v̄_i/∂q_l over the PQ buses;
/// all other phasors are held fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasorSensitivity {
    pub target_bus: i64,
    pub target_index: usize,
    /// internal positions of the unknown phasors, parallel to dv_dp/dv_dq
    pub buses: Vec<usize>,
    pub dv_dp: Vec<C64>,
    pub dv_dq: Vec<C64>,
}

/// Real 2n×2n form of conj(∂v̄_i)·I_i + conj(v̄_i)·Σ_k Y_ik·∂v̄_k, unknowns
/// ordered [Re ∂v̄ | Im ∂v̄].
fn system(y: &AdmittanceMatrix, point: &OperatingPoint, buses: &[usize]) -> Mat {
    let n = buses.len();
    let v = point.phasors();
    let current = y.currents(&v);
    let mut a = Mat::zeros(2 * n, 2 * n);
    for (r, &i) in buses.iter().enumerate() {
        let vi = v[i].conj();
        for (c, &k) in buses.iter().enumerate() {
            let coef = vi * y.entry(i, k);
            a[(r, c)] += coef.re;
            a[(r, n + c)] -= coef.im;
            a[(n + r, c)] += coef.im;
            a[(n + r, n + c)] += coef.re;
        }
        let ii = current[i];
        a[(r, r)] += ii.re;
        a[(r, n + r)] += ii.im;
        a[(n + r, r)] += ii.im;
        a[(n + r, n + r)] -= ii.re;
    }
    a
}

fn unpack(x: &Mat, col: usize, n: usize) -> Vec<C64> {
    (0..n).map(|k| C64::new(x[(k, col)], x[(n + k, col)])).collect()
}

fn factor(
    case: &NetworkCase,
    y: &AdmittanceMatrix,
    point: &OperatingPoint,
) -> Result<(Vec<usize>, Lu), SensitivityError> {
    let buses = case.pq_indices();
    let lu = Lu::factor(&system(y, point, &buses)).map_err(SensitivityError::SingularMatrix)?;
    Ok((buses, lu))
}

/// Right-hand sides: 1 in the real row of l for p, −j (−1 in the imaginary
/// row) for q.
fn rhs(n: usize, ls: &[usize]) -> Mat {
    let mut b = Mat::zeros(2 * n, 2 * ls.len());
    for (c, &l) in ls.iter().enumerate() {
        b[(l, c)] = 1.0;
        b[(n + l, ls.len() + c)] = -1.0;
    }
    b
}

pub fn phasor_sensitivities(
    case: &NetworkCase,
    y: &AdmittanceMatrix,
    point: &OperatingPoint,
    l: usize,
) -> Result<PhasorSensitivity, SensitivityError> {
    if case.buses[l].kind != BusKind::Pq {
        return Err(SensitivityError::NotPqBus(case.buses[l].id));
    }
    let (buses, lu) = factor(case, y, point)?;
    let n = buses.len();
    let pos = buses.iter().position(|&k| k == l).expect("l is a PQ bus");
    let x = lu.solve(&rhs(n, &[pos])).expect("dimensions match");
    Ok(PhasorSensitivity {
        target_bus: case.buses[l].id,
        target_index: l,
        dv_dp: unpack(&x, 0, n),
        dv_dq: unpack(&x, 1, n),
        buses,
    })
}

/// ∂v_i/∂x = Re{conj(v̄_i)·∂v̄_i/∂x}/v_i for the listed buses.
pub fn magnitude_from_phasor(
    point: &OperatingPoint,
    buses: &[usize],
    dv: &[C64],
) -> Result<Vec<f64>, SensitivityError> {
    let v = point.phasors();
    buses
        .iter()
        .zip(dv)
        .map(|(&i, d)| {
            if point.v[i] <= 1e-9 {
                return Err(SensitivityError::ZeroVoltage(i));
            }
            Ok((v[i].conj() * d).re / point.v[i])
        })
        .collect()
}

/// Magnitude sensitivities for every PQ target from one factorization.
pub fn phasor_sensitivity_matrices(
    case: &NetworkCase,
    y: &AdmittanceMatrix,
    point: &OperatingPoint,
) -> Result<VoltageSensitivities, SensitivityError> {
    let (buses, lu) = factor(case, y, point)?;
    let n = buses.len();
    let all: Vec<usize> = (0..n).collect();
    let x = lu.solve(&rhs(n, &all)).expect("dimensions match");
    let mut s_v_p = Mat::zeros(n, n);
    let mut s_v_q = Mat::zeros(n, n);
    for c in 0..n {
        let dp = magnitude_from_phasor(point, &buses, &unpack(&x, c, n))?;
        let dq = magnitude_from_phasor(point, &buses, &unpack(&x, n + c, n))?;
        for r in 0..n {
            s_v_p[(r, c)] = dp[r];
            s_v_q[(r, c)] = dq[r];
        }
    }
    Ok(VoltageSensitivities { s_v_p, s_v_q })
}

/// Largest residual of the complex defining equations for both targets,
/// evaluated directly in complex arithmetic.
pub fn phasor_residual(y: &AdmittanceMatrix, point: &OperatingPoint, ps: &PhasorSensitivity) -> f64 {
    let v = point.phasors();
    let current = y.currents(&v);
    let mut worst = 0.0f64;
    for (dv, rhs) in [(&ps.dv_dp, C64::new(1.0, 0.0)), (&ps.dv_dq, C64::new(0.0, -1.0))] {
        for (r, &i) in ps.buses.iter().enumerate() {
            let coupled: C64 = ps.buses.iter().zip(dv.iter()).map(|(&k, d)| y.entry(i, k) * d).sum();
            let lhs = dv[r].conj() * current[i] + v[i].conj() * coupled;
            let want = if i == ps.target_index { rhs } else { C64::new(0.0, 0.0) };
            worst = worst.max((lhs - want).norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{build_admittance, parse_matpower_case};
    use crate::powerflow::{solve_newton_raphson, BusSet, SolveOptions};
    use crate::sensitivity::{distinctness_check, sensitivities};

    fn solved(text: &str) -> (NetworkCase, AdmittanceMatrix, OperatingPoint) {
        let case = parse_matpower_case(text).unwrap();
        let y = build_admittance(&case).unwrap();
        let point = solve_newton_raphson(&case, &SolveOptions::default()).unwrap();
        (case, y, point)
    }

    #[test]
    fn projection_of_radial_and_tangential_directions() {
        let (_, _, point) = solved(include_str!("../../../../cases/case4_radial.m"));
        let v = point.phasors();
        let buses = [1usize, 2];
        let tangential: Vec<C64> = buses.iter().map(|&i| C64::new(0.0, 1.0) * v[i]).collect();
        let radial: Vec<C64> = buses.iter().map(|&i| v[i] / v[i].norm()).collect();
        for m in magnitude_from_phasor(&point, &buses, &tangential).unwrap() {
            assert!(m.abs() < 1e-15);
        }
        for m in magnitude_from_phasor(&point, &buses, &radial).unwrap() {
            assert!((m - 1.0).abs() < 1e-15);
        }
        let mut dead = point.clone();
        dead.v[1] = 0.0;
        assert_eq!(magnitude_from_phasor(&dead, &buses, &radial), Err(SensitivityError::ZeroVoltage(1)));
    }

    #[test]
    fn radial_phasor_route_matches_inverse() {
        let (case, y, point) = solved(include_str!("../../../../cases/case4_radial.m"));
        let s = sensitivities(&case, &y, &point, BusSet::Pq).unwrap();
        let ph = phasor_sensitivity_matrices(&case, &y, &point).unwrap();
        assert!(s.magnitude().max_abs_diff(&ph) < 1e-8);
        let one = phasor_sensitivities(&case, &y, &point, 2).unwrap();
        let col = magnitude_from_phasor(&point, &one.buses, &one.dv_dq).unwrap();
        for (r, x) in col.iter().enumerate() {
            assert!((x - s.s_v_q[(r, 1)]).abs() < 1e-8);
        }
    }

    #[test]
    fn case4_dist_residual_and_distinctness() {
        let (case, y, point) = solved(include_str!("../../../../cases/case4_dist.m"));
        for l in case.pq_indices() {
            let ps = phasor_sensitivities(&case, &y, &point, l).unwrap();
            assert!(phasor_residual(&y, &point, &ps) < 1e-10);
        }
        let ph = phasor_sensitivity_matrices(&case, &y, &point).unwrap();
        assert!(distinctness_check(&ph.s_v_p, &ph.s_v_q, 1e-9).violations.is_empty());
    }

    #[test]
    fn non_pq_target_rejected() {
        let (case, y, point) = solved(include_str!("../../../../cases/case4_dist.m"));
        assert_eq!(phasor_sensitivities(&case, &y, &point, 0), Err(SensitivityError::NotPqBus(1)));
    }
}
