//! Network case model, MATPOWER/JSON ingestion and the bus admittance matrix.

mod admittance;
mod matpower;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use admittance::{build_admittance, AdmittanceMatrix};
pub use matpower::parse_matpower_case;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CaseError {
    #[error("malformed case: {0}")]
    MalformedCase(String),
    #[error("missing matrix `mpc.{0}`")]
    MissingMatrix(&'static str),
    #[error("case has no slack bus")]
    NoSlack,
    #[error("case has more than one slack bus (ids {0} and {1})")]
    MultipleSlack(i64, i64),
    #[error("branch {index} references unknown bus {bus}")]
    DanglingBranch { index: usize, bus: i64 },
    #[error("generator {index} references unknown bus {bus}")]
    DanglingGenerator { index: usize, bus: i64 },
    #[error("in-service branch {0} has zero series impedance")]
    ZeroImpedanceBranch(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Slack,
    Pv,
    Pq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: i64,
    pub kind: BusKind,
    /// MW
    pub p_load: f64,
    /// MVAr
    pub q_load: f64,
    /// MW consumed at 1 pu
    pub g_shunt: f64,
    /// MVAr injected at 1 pu
    pub b_shunt: f64,
    pub v_init: f64,
    /// degrees
    pub theta_init: f64,
    pub base_kv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from_bus: i64,
    pub to_bus: i64,
    pub r: f64,
    pub x: f64,
    pub b_charging: f64,
    /// 0 means nominal (1.0)
    pub tap: f64,
    /// degrees
    pub shift: f64,
    pub status: bool,
}

impl Branch {
    pub fn ratio(&self) -> f64 {
        if self.tap == 0.0 {
            1.0
        } else {
            self.tap
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus: i64,
    /// MW
    pub p_gen: f64,
    /// MVAr
    pub q_gen: f64,
    /// voltage magnitude setpoint (pu)
    pub v_set: f64,
    pub status: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCase {
    #[serde(default)]
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub gens: Vec<Generator>,
    pub slack_index: usize,
}

impl NetworkCase {
    /// Builds a case from its parts, checking every model invariant and
    /// locating the slack bus.
    pub fn new(
        name: impl Into<String>,
        base_mva: f64,
        buses: Vec<Bus>,
        branches: Vec<Branch>,
        gens: Vec<Generator>,
    ) -> Result<Self, CaseError> {
        let slack_index = find_slack(&buses)?;
        let case = NetworkCase { name: name.into(), base_mva, buses, branches, gens, slack_index };
        case.validate()?;
        Ok(case)
    }

    pub fn validate(&self) -> Result<(), CaseError> {
        if !(self.base_mva > 0.0) || !self.base_mva.is_finite() {
            return Err(CaseError::MalformedCase(format!("baseMVA must be positive, got {}", self.base_mva)));
        }
        if self.buses.is_empty() {
            return Err(CaseError::MalformedCase("case has no buses".into()));
        }
        let slack = find_slack(&self.buses)?;
        if slack != self.slack_index {
            return Err(CaseError::MalformedCase(format!(
                "slack_index {} does not point at the slack bus (position {slack})",
                self.slack_index
            )));
        }
        let mut seen = HashMap::with_capacity(self.buses.len());
        for (k, bus) in self.buses.iter().enumerate() {
            if seen.insert(bus.id, k).is_some() {
                return Err(CaseError::MalformedCase(format!("duplicate bus id {}", bus.id)));
            }
            if !(bus.v_init > 0.0) {
                return Err(CaseError::MalformedCase(format!(
                    "bus {} has non-positive initial voltage {}",
                    bus.id, bus.v_init
                )));
            }
        }
        for (index, br) in self.branches.iter().enumerate() {
            for bus in [br.from_bus, br.to_bus] {
                if !seen.contains_key(&bus) {
                    return Err(CaseError::DanglingBranch { index, bus });
                }
            }
        }
        for (index, g) in self.gens.iter().enumerate() {
            if !seen.contains_key(&g.bus) {
                return Err(CaseError::DanglingGenerator { index, bus: g.bus });
            }
        }
        Ok(())
    }

    pub fn n_bus(&self) -> usize {
        self.buses.len()
    }

    /// Map from external bus id to internal position (file order).
    pub fn index_of(&self) -> HashMap<i64, usize> {
        self.buses.iter().enumerate().map(|(k, b)| (b.id, k)).collect()
    }

    pub fn bus_ids(&self) -> Vec<i64> {
        self.buses.iter().map(|b| b.id).collect()
    }

    pub fn indices_of_kind(&self, kind: BusKind) -> Vec<usize> {
        self.buses.iter().enumerate().filter(|(_, b)| b.kind == kind).map(|(k, _)| k).collect()
    }

    pub fn pq_indices(&self) -> Vec<usize> {
        self.indices_of_kind(BusKind::Pq)
    }

    /// Scheduled net injections (generation minus load) in per unit.
    pub fn scheduled_injections(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_bus();
        let idx = self.index_of();
        let mut p = vec![0.0; n];
        let mut q = vec![0.0; n];
        for (k, bus) in self.buses.iter().enumerate() {
            p[k] -= bus.p_load / self.base_mva;
            q[k] -= bus.q_load / self.base_mva;
        }
        for g in self.gens.iter().filter(|g| g.status) {
            let k = idx[&g.bus];
            p[k] += g.p_gen / self.base_mva;
            q[k] += g.q_gen / self.base_mva;
        }
        (p, q)
    }

    /// Voltage magnitude setpoints: generator setpoint on slack/PV buses,
    /// the bus record elsewhere.
    pub fn voltage_setpoints(&self) -> Vec<f64> {
        let idx = self.index_of();
        let mut v: Vec<f64> = self.buses.iter().map(|b| b.v_init).collect();
        for g in self.gens.iter().filter(|g| g.status) {
            let k = idx[&g.bus];
            if self.buses[k].kind != BusKind::Pq && g.v_set > 0.0 {
                v[k] = g.v_set;
            }
        }
        v
    }
}

fn find_slack(buses: &[Bus]) -> Result<usize, CaseError> {
    let mut slack: Option<usize> = None;
    for (k, b) in buses.iter().enumerate() {
        if b.kind == BusKind::Slack {
            if let Some(first) = slack {
                return Err(CaseError::MultipleSlack(buses[first].id, b.id));
            }
            slack = Some(k);
        }
    }
    slack.ok_or(CaseError::NoSlack)
}

pub fn parse_json_case(text: &str) -> Result<NetworkCase, CaseError> {
    let case: NetworkCase = serde_json::from_str(text).map_err(|e| CaseError::MalformedCase(e.to_string()))?;
    case.validate()?;
    Ok(case)
}

pub fn case_to_json(case: &NetworkCase) -> String {
    serde_json::to_string_pretty(case).expect("case serializes")
}

/// Parses either format, choosing by the first non-blank character.
pub fn parse_case(text: &str) -> Result<NetworkCase, CaseError> {
    if text.trim_start().starts_with('{') {
        parse_json_case(text)
    } else {
        parse_matpower_case(text)
    }
}
