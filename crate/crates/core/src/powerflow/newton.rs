use serde::{Deserialize, Serialize};

use super::jacobian::full_jacobian;
use super::{power_mismatch, OperatingPoint, PowerFlowError};
use crate::netmodel::{build_admittance, AdmittanceMatrix, BusKind, NetworkCase};
use crate::numkit::Lu;
use crate::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// ∞-norm of the per-unit mismatch
    pub tol: f64,
    pub max_iter: usize,
    /// 1.0 pu / 0 rad start (setpoints kept on slack and PV buses);
    /// otherwise the magnitudes and angles stored in the case
    pub flat_start: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-8, max_iter: 20, flat_start: true }
    }
}

/// Net injection schedule (pu) and voltage setpoints driving a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub v_set: Vec<f64>,
}

impl Schedule {
    pub fn from_case(case: &NetworkCase) -> Self {
        let (p, q) = case.scheduled_injections();
        Schedule { p, q, v_set: case.voltage_setpoints() }
    }
}

pub fn solve_newton_raphson(case: &NetworkCase, opts: &SolveOptions) -> Result<OperatingPoint, PowerFlowError> {
    let y = build_admittance(case)?;
    solve_from(case, &y, &Schedule::from_case(case), None, opts)
}

/// Newton-Raphson in polar form over the classical variables (non-slack
/// angles, PQ magnitudes). `start` overrides the initial state; setpoint
/// magnitudes are re-imposed on slack and PV buses.
pub fn solve_from(
    case: &NetworkCase,
    y: &AdmittanceMatrix,
    sched: &Schedule,
    start: Option<&OperatingPoint>,
    opts: &SolveOptions,
) -> Result<OperatingPoint, PowerFlowError> {
    let n = case.n_bus();
    if y.n_bus != n || sched.p.len() != n || sched.q.len() != n || sched.v_set.len() != n {
        return Err(PowerFlowError::DimensionMismatch(format!(
            "case has {n} buses, admittance {} and schedule {}",
            y.n_bus,
            sched.p.len()
        )));
    }
    let slack = case.slack_index;
    let (mut v, mut theta) = match start {
        Some(pt) => (pt.v.clone(), pt.theta.clone()),
        None if opts.flat_start => (vec![1.0; n], vec![0.0; n]),
        None => (
            case.buses.iter().map(|b| b.v_init).collect(),
            case.buses.iter().map(|b| b.theta_init.to_radians()).collect(),
        ),
    };
    if start.is_none() {
        theta[slack] = case.buses[slack].theta_init.to_radians();
    }
    for (k, bus) in case.buses.iter().enumerate() {
        if bus.kind != BusKind::Pq {
            v[k] = sched.v_set[k];
        }
    }

    let ns: Vec<usize> = (0..n).filter(|&k| k != slack).collect();
    let pq = case.pq_indices();
    let (na, nm) = (ns.len(), pq.len());

    let mut iterations = 0;
    loop {
        let (dp, dq) = power_mismatch(y, &v, &theta, &sched.p, &sched.q)?;
        let f: Vec<f64> = ns.iter().map(|&k| dp[k]).chain(pq.iter().map(|&k| dq[k])).collect();
        let norm = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let done = norm <= opts.tol;
        if done || iterations >= opts.max_iter || !norm.is_finite() {
            let mut point = OperatingPoint::at_state(y, v, theta);
            point.converged = done;
            point.mismatch_norm = norm;
            point.iterations = iterations;
            if done {
                return Ok(point);
            }
            return Err(PowerFlowError::NoConvergence { point: Box::new(point) });
        }

        let [pt, pv, qt, qv] = full_jacobian(y, &v, &theta);
        let mut j = Mat::zeros(na + nm, na + nm);
        for (r, &i) in ns.iter().enumerate() {
            for (c, &k) in ns.iter().enumerate() {
                j[(r, c)] = pt[(i, k)];
            }
            for (c, &k) in pq.iter().enumerate() {
                j[(r, na + c)] = pv[(i, k)];
            }
        }
        for (r, &i) in pq.iter().enumerate() {
            for (c, &k) in ns.iter().enumerate() {
                j[(na + r, c)] = qt[(i, k)];
            }
            for (c, &k) in pq.iter().enumerate() {
                j[(na + r, na + c)] = qv[(i, k)];
            }
        }
        let dx = Lu::factor(&j).map_err(PowerFlowError::SingularJacobian)?.solve_vec(&f).expect("dimensions match");
        for (r, &k) in ns.iter().enumerate() {
            theta[k] += dx[r];
        }
        for (r, &k) in pq.iter().enumerate() {
            v[k] += dx[na + r];
        }
        iterations += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{parse_matpower_case, Branch, Bus};

    fn bus(id: i64, kind: BusKind, p_load: f64) -> Bus {
        Bus { id, kind, p_load, q_load: 0.0, g_shunt: 0.0, b_shunt: 0.0, v_init: 1.0, theta_init: 0.0, base_kv: 1.0 }
    }

    fn two_bus(load_mw: f64) -> NetworkCase {
        let br = Branch { from_bus: 1, to_bus: 2, r: 0.0, x: 0.1, b_charging: 0.0, tap: 0.0, shift: 0.0, status: true };
        NetworkCase::new(
            "two",
            100.0,
            vec![bus(1, BusKind::Slack, 0.0), bus(2, BusKind::Pq, load_mw)],
            vec![br],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn unloaded_network_needs_no_iterations() {
        let pt = solve_newton_raphson(&two_bus(0.0), &SolveOptions::default()).unwrap();
        assert_eq!(pt.iterations, 0);
        assert_eq!(pt.v, vec![1.0, 1.0]);
        assert_eq!(pt.theta, vec![0.0, 0.0]);
    }

    #[test]
    fn two_bus_closed_form() {
        // lossless line, unity power factor load p: v⁴ − v² + (p·x)² = 0
        let pt = solve_newton_raphson(&two_bus(50.0), &SolveOptions { tol: 1e-12, ..Default::default() }).unwrap();
        let px: f64 = 0.5 * 0.1;
        let v2 = ((1.0 + (1.0 - 4.0 * px * px).sqrt()) / 2.0).sqrt();
        assert!((pt.v[1] - v2).abs() < 1e-10);
        assert!((pt.theta[1] + (px / v2).asin()).abs() < 1e-10);
    }

    #[test]
    fn case9_converges_quickly() {
        let case = parse_matpower_case(include_str!("../../../../cases/case9.m")).unwrap();
        let pt = solve_newton_raphson(&case, &SolveOptions::default()).unwrap();
        assert!(pt.converged && pt.iterations <= 6);
        assert!(pt.mismatch_norm <= 1e-8);
        assert_eq!(pt.v[1], 1.025);
        // slack generation balances the system: about 71.6 MW
        assert!((pt.p_inj[0] - 0.716).abs() < 1e-3);
    }

    #[test]
    fn overload_reports_last_iterate() {
        let case = two_bus(1000.0);
        match solve_newton_raphson(&case, &SolveOptions::default()) {
            Err(PowerFlowError::NoConvergence { point }) => {
                assert!(!point.converged);
                assert_eq!(point.v.len(), 2);
            }
            Err(PowerFlowError::SingularJacobian(_)) => {}
            other => panic!("expected failure, got {other:?}"),
        }
    }
}
