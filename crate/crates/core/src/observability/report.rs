use serde::{Deserialize, Serialize};

use super::{
    build_k_abs, preprocess_zero_injections, s_dagger, s_ddagger, theorem1_check, theorem2_check, ObservabilityError,
    PowerFactorProfile,
};
use crate::netmodel::{build_admittance, BusKind, NetworkCase};
use crate::numkit::{fmt_human, fmt_machine};
use crate::powerflow::{assemble_jacobian, solve_newton_raphson, BusSet, SolveOptions};
use crate::sensitivity::invert_jacobian;

/// One row of the theorem tables. Numbers that could not be computed are NaN
/// (null in JSON) and `annotation` carries the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityReport {
    pub case: String,
    pub bus_set: BusSet,
    pub n: usize,
    pub assumption1_dp_dtheta_pd: bool,
    pub jacobian_invertible: bool,
    #[serde(with = "nullable")]
    pub lambda_min_sigma: f64,
    #[serde(with = "nullable")]
    pub lambda_min_eig: f64,
    #[serde(with = "nullable")]
    pub alpha_min: f64,
    #[serde(with = "nullable")]
    pub alpha_max: f64,
    #[serde(with = "nullable")]
    pub delta_k: f64,
    #[serde(with = "nullable")]
    pub bound_strict: f64,
    #[serde(with = "nullable")]
    pub value_neumann: f64,
    pub thm1_holds: bool,
    #[serde(with = "nullable")]
    pub min_eig_s_dagger: f64,
    #[serde(with = "nullable")]
    pub min_eig_s_ddagger: f64,
    pub thm2_holds: bool,
    pub m_pd: bool,
    pub mixed_sign: bool,
    pub zero_injections: usize,
    pub annotation: Option<String>,
}

impl ObservabilityReport {
    fn empty(case: &str, bus_set: BusSet) -> Self {
        ObservabilityReport {
            case: case.to_string(),
            bus_set,
            n: 0,
            assumption1_dp_dtheta_pd: false,
            jacobian_invertible: false,
            lambda_min_sigma: f64::NAN,
            lambda_min_eig: f64::NAN,
            alpha_min: f64::NAN,
            alpha_max: f64::NAN,
            delta_k: f64::NAN,
            bound_strict: f64::NAN,
            value_neumann: f64::NAN,
            thm1_holds: false,
            min_eig_s_dagger: f64::NAN,
            min_eig_s_ddagger: f64::NAN,
            thm2_holds: false,
            m_pd: false,
            mixed_sign: false,
            zero_injections: 0,
            annotation: None,
        }
    }

    pub fn alpha_range(&self) -> f64 {
        self.alpha_max - self.alpha_min
    }
}

mod nullable {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// Solves the case, evaluates both theorems at the solution and returns the
/// table row. Failures are recorded in `annotation`, never raised.
pub fn check_case(name: &str, case: &NetworkCase, bus_set: BusSet) -> ObservabilityReport {
    let mut row = ObservabilityReport::empty(name, bus_set);
    if let Err(e) = fill(&mut row, case, bus_set) {
        row.annotation = Some(e.to_string());
    }
    row
}

fn fill(row: &mut ObservabilityReport, case: &NetworkCase, bus_set: BusSet) -> Result<(), ObservabilityError> {
    let y = build_admittance(case).map_err(crate::powerflow::PowerFlowError::from)?;
    let point = solve_newton_raphson(case, &SolveOptions::default())?;
    let j = assemble_jacobian(case, &y, &point, bus_set)?;
    row.n = j.n();
    // scheduled injections on PQ buses (exact), solved ones elsewhere
    let (p_sched, q_sched) = case.scheduled_injections();
    let pick = |k: usize, sched: &[f64], solved: &[f64]| {
        if case.buses[k].kind == BusKind::Pq {
            sched[k]
        } else {
            solved[k]
        }
    };
    let p: Vec<f64> = j.buses.iter().map(|&k| pick(k, &p_sched, &point.p_inj)).collect();
    let q: Vec<f64> = j.buses.iter().map(|&k| pick(k, &q_sched, &point.q_inj)).collect();
    let profile = preprocess_zero_injections(&PowerFactorProfile::from_injections(&p, &q))?;
    (row.alpha_min, row.alpha_max) = profile.alpha_range();
    row.delta_k = profile.delta_k;
    row.mixed_sign = profile.mixed_sign;
    row.zero_injections = profile.zero_injection_buses.len();

    let t1 = theorem1_check(&j, &profile)?;
    row.assumption1_dp_dtheta_pd = t1.assumption1_dp_dtheta_pd;
    row.jacobian_invertible = t1.jacobian_invertible;
    row.lambda_min_sigma = t1.lambda_min_sigma;
    row.lambda_min_eig = t1.lambda_min_eig;
    row.m_pd = t1.m_pd;
    row.value_neumann = t1.value_neumann;
    row.bound_strict = t1.bound_strict;
    row.thm1_holds = t1.thm1_holds;

    let s = invert_jacobian(&j)?;
    let k = build_k_abs(&profile);
    let sd = s_dagger(&s.s_v_p, &s.s_v_q, &k);
    let sdd = s_ddagger(&s.s_v_p, &s.s_v_q, &k).ok();
    let t2 = theorem2_check(&sd, sdd.as_ref())?;
    row.min_eig_s_dagger = t2.min_eig_s_dagger;
    row.min_eig_s_ddagger = t2.min_eig_s_ddagger;
    row.thm2_holds = t2.thm2_holds;
    Ok(())
}

/// One row per case, in input order.
pub fn report_table(cases: &[(String, NetworkCase)], bus_set: BusSet) -> Vec<ObservabilityReport> {
    cases.iter().map(|(name, case)| check_case(name, case, bus_set)).collect()
}

pub const CSV_HEADER: &str = "case,bus_set,n,assumption1,jacobian_invertible,lambda_min_sigma,lambda_min_eig,\
alpha_min,alpha_max,alpha_range,delta_k,bound_strict,value_neumann,thm1_holds,min_eig_s_dagger,\
min_eig_s_ddagger,thm2_holds,m_pd,mixed_sign,zero_injections,annotation";

fn yes_no(b: bool) -> &'static str {
    if b {
        "Yes"
    } else {
        "No"
    }
}

fn machine(x: f64) -> String {
    if x.is_nan() {
        "n/a".into()
    } else {
        fmt_machine(x)
    }
}

pub fn report_csv(rows: &[ObservabilityReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let note = r.annotation.as_deref().unwrap_or("").replace(['"', ','], ";");
        let fields = [
            r.case.clone(),
            r.bus_set.to_string(),
            r.n.to_string(),
            yes_no(r.assumption1_dp_dtheta_pd).into(),
            yes_no(r.jacobian_invertible).into(),
            machine(r.lambda_min_sigma),
            machine(r.lambda_min_eig),
            machine(r.alpha_min),
            machine(r.alpha_max),
            machine(r.alpha_range()),
            machine(r.delta_k),
            machine(r.bound_strict),
            machine(r.value_neumann),
            yes_no(r.thm1_holds).into(),
            machine(r.min_eig_s_dagger),
            machine(r.min_eig_s_ddagger),
            yes_no(r.thm2_holds).into(),
            yes_no(r.m_pd).into(),
            yes_no(r.mixed_sign).into(),
            r.zero_injections.to_string(),
            note,
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Fixed-width table with 4 significant digits: assumption flags, then
/// quantities, then condition flags.
pub fn report_human(rows: &[ObservabilityReport]) -> String {
    let header = [
        "case",
        "A1 holds",
        "J inv",
        "λmin σ",
        "λmin |eig|",
        "α range",
        "Δk",
        "bound",
        "value",
        "Neumann",
        "λmin S†",
        "λmin S‡",
        "S† PD",
    ];
    let mut table: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for r in rows {
        table.push(vec![
            r.case.clone(),
            yes_no(r.assumption1_dp_dtheta_pd).into(),
            yes_no(r.jacobian_invertible).into(),
            fmt_human(r.lambda_min_sigma),
            fmt_human(r.lambda_min_eig),
            fmt_human(r.alpha_range()),
            fmt_human(r.delta_k),
            fmt_human(r.bound_strict),
            fmt_human(r.value_neumann),
            yes_no(r.thm1_holds).into(),
            fmt_human(r.min_eig_s_dagger),
            fmt_human(r.min_eig_s_ddagger),
            yes_no(r.thm2_holds).into(),
        ]);
    }
    let widths: Vec<usize> =
        (0..header.len()).map(|c| table.iter().map(|row| row[c].chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in &table {
        let cells: Vec<String> = row.iter().zip(&widths).map(|(s, &w)| format!("{s:<w$}")).collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    for r in rows {
        if let Some(note) = &r.annotation {
            out.push_str(&format!("note [{}]: {note}\n", r.case));
        }
        if r.mixed_sign {
            out.push_str(&format!("note [{}]: leading and lagging buses mixed; theorems use |K|\n", r.case));
        }
    }
    out
}
