use super::{injections, BusSet, OperatingPoint, PowerFlowError};
use crate::netmodel::{AdmittanceMatrix, BusKind, NetworkCase};
use crate::numkit::Lu;
use crate::Mat;

/// The four partial-derivative blocks of the injections with respect to the
/// state, restricted to a bus set.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianBlocks {
    pub dp_dtheta: Mat,
    pub dp_dv: Mat,
    pub dq_dtheta: Mat,
    pub dq_dv: Mat,
    pub bus_set: BusSet,
    /// row/column k corresponds to bus id `index_map[k]`
    pub index_map: Vec<i64>,
    /// internal bus positions, parallel to `index_map`
    pub buses: Vec<usize>,
}

impl JacobianBlocks {
    pub fn n(&self) -> usize {
        self.buses.len()
    }

    /// [[dp_dθ, dp_dv], [dq_dθ, dq_dv]]
    pub fn assemble(&self) -> Mat {
        let n = self.n();
        let mut j = Mat::zeros(2 * n, 2 * n);
        j.view_mut((0, 0), (n, n)).copy_from(&self.dp_dtheta);
        j.view_mut((0, n), (n, n)).copy_from(&self.dp_dv);
        j.view_mut((n, 0), (n, n)).copy_from(&self.dq_dtheta);
        j.view_mut((n, n), (n, n)).copy_from(&self.dq_dv);
        j
    }

    pub fn from_assembled(j: &Mat, bus_set: BusSet, index_map: Vec<i64>, buses: Vec<usize>) -> Self {
        let n = buses.len();
        JacobianBlocks {
            dp_dtheta: j.view((0, 0), (n, n)).into_owned(),
            dp_dv: j.view((0, n), (n, n)).into_owned(),
            dq_dtheta: j.view((n, 0), (n, n)).into_owned(),
            dq_dv: j.view((n, n), (n, n)).into_owned(),
            bus_set,
            index_map,
            buses,
        }
    }
}

/// Partial derivatives over every bus, as (dp_dθ, dp_dv, dq_dθ, dq_dv).
pub fn full_jacobian(y: &AdmittanceMatrix, v: &[f64], theta: &[f64]) -> [Mat; 4] {
    let n = y.n_bus;
    let (p, q) = injections(y, v, theta);
    let mut pt = Mat::zeros(n, n);
    let mut pv = Mat::zeros(n, n);
    let mut qt = Mat::zeros(n, n);
    let mut qv = Mat::zeros(n, n);
    for i in 0..n {
        for k in 0..n {
            if i == k {
                continue;
            }
            let (g, b) = (y.g[(i, k)], y.b[(i, k)]);
            if g == 0.0 && b == 0.0 {
                continue;
            }
            let (s, c) = (theta[i] - theta[k]).sin_cos();
            let re = g * c + b * s;
            let im = g * s - b * c;
            pt[(i, k)] = v[i] * v[k] * im;
            qt[(i, k)] = -v[i] * v[k] * re;
            pv[(i, k)] = v[i] * re;
            qv[(i, k)] = v[i] * im;
        }
        let (g, b) = (y.g[(i, i)], y.b[(i, i)]);
        pt[(i, i)] = -q[i] - b * v[i] * v[i];
        qt[(i, i)] = p[i] - g * v[i] * v[i];
        pv[(i, i)] = p[i] / v[i] + g * v[i];
        qv[(i, i)] = q[i] / v[i] - b * v[i];
    }
    [pt, pv, qt, qv]
}

pub fn assemble_jacobian(
    case: &NetworkCase,
    y: &AdmittanceMatrix,
    point: &OperatingPoint,
    bus_set: BusSet,
) -> Result<JacobianBlocks, PowerFlowError> {
    check_dims(case, y, point)?;
    let full = full_jacobian(y, &point.v, &point.theta);
    reduce(case, full, bus_set)
}

/// Central differences of the calculated injections with step `h`.
pub fn finite_difference_jacobian(
    case: &NetworkCase,
    y: &AdmittanceMatrix,
    point: &OperatingPoint,
    h: f64,
    bus_set: BusSet,
) -> Result<JacobianBlocks, PowerFlowError> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(PowerFlowError::InvalidStep(h));
    }
    check_dims(case, y, point)?;
    let n = y.n_bus;
    let mut pt = Mat::zeros(n, n);
    let mut pv = Mat::zeros(n, n);
    let mut qt = Mat::zeros(n, n);
    let mut qv = Mat::zeros(n, n);
    let mut v = point.v.clone();
    let mut theta = point.theta.clone();
    for k in 0..n {
        theta[k] += h;
        let (pp, qp) = injections(y, &v, &theta);
        theta[k] -= 2.0 * h;
        let (pm, qm) = injections(y, &v, &theta);
        theta[k] = point.theta[k];
        for i in 0..n {
            pt[(i, k)] = (pp[i] - pm[i]) / (2.0 * h);
            qt[(i, k)] = (qp[i] - qm[i]) / (2.0 * h);
        }
        v[k] += h;
        let (pp, qp) = injections(y, &v, &theta);
        v[k] -= 2.0 * h;
        let (pm, qm) = injections(y, &v, &theta);
        v[k] = point.v[k];
        for i in 0..n {
            pv[(i, k)] = (pp[i] - pm[i]) / (2.0 * h);
            qv[(i, k)] = (qp[i] - qm[i]) / (2.0 * h);
        }
    }
    reduce(case, [pt, pv, qt, qv], bus_set)
}

fn check_dims(case: &NetworkCase, y: &AdmittanceMatrix, point: &OperatingPoint) -> Result<(), PowerFlowError> {
    let n = case.n_bus();
    if y.n_bus != n || point.v.len() != n || point.theta.len() != n {
        return Err(PowerFlowError::DimensionMismatch(format!(
            "case has {n} buses, admittance {} and point {}/{}",
            y.n_bus,
            point.v.len(),
            point.theta.len()
        )));
    }
    Ok(())
}

fn select(a: &Mat, rows: &[usize], cols: &[usize]) -> Mat {
    Mat::from_fn(rows.len(), cols.len(), |r, c| a[(rows[r], cols[c])])
}

fn reduce(case: &NetworkCase, full: [Mat; 4], bus_set: BusSet) -> Result<JacobianBlocks, PowerFlowError> {
    let [pt, pv, qt, qv] = full;
    let pq = case.pq_indices();
    let make = |buses: Vec<usize>, blocks: [Mat; 4]| {
        let [dp_dtheta, dp_dv, dq_dtheta, dq_dv] = blocks;
        JacobianBlocks {
            dp_dtheta,
            dp_dv,
            dq_dtheta,
            dq_dv,
            bus_set,
            index_map: buses.iter().map(|&k| case.buses[k].id).collect(),
            buses,
        }
    };
    match bus_set {
        BusSet::All => Ok(make((0..case.n_bus()).collect(), [pt, pv, qt, qv])),
        BusSet::Pq => {
            let blocks = [&pt, &pv, &qt, &qv].map(|m| select(m, &pq, &pq));
            Ok(make(pq, blocks))
        }
        BusSet::Nonslack => {
            // Eliminate PV angles from the classical NR system using the PV
            // active-power rows (their injections are held).
            let pvb = case.indices_of_kind(BusKind::Pv);
            let b = |m: &Mat| select(m, &pq, &pq);
            if pvb.is_empty() {
                return Ok(make(pq.clone(), [b(&pt), b(&pv), b(&qt), b(&qv)]));
            }
            let paa = Lu::factor(&select(&pt, &pvb, &pvb)).map_err(PowerFlowError::SingularJacobian)?;
            let x_t = paa.solve(&select(&pt, &pvb, &pq)).expect("square");
            let x_v = paa.solve(&select(&pv, &pvb, &pq)).expect("square");
            let p_ba = select(&pt, &pq, &pvb);
            let q_ba = select(&qt, &pq, &pvb);
            let blocks = [b(&pt) - &p_ba * &x_t, b(&pv) - &p_ba * &x_v, b(&qt) - &q_ba * &x_t, b(&qv) - &q_ba * &x_v];
            Ok(make(pq, blocks))
        }
    }
}
