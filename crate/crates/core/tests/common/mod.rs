#![allow(dead_code)]

use std::path::PathBuf;

use pfsense::netmodel::{build_admittance, parse_matpower_case, AdmittanceMatrix, NetworkCase};
use pfsense::powerflow::{solve_newton_raphson, OperatingPoint, SolveOptions};

pub const ALL: [&str; 7] = ["case4_dist", "case4_radial", "case5", "case9", "case14", "case24_ieee_rts", "case30"];
pub const RADIAL: [&str; 2] = ["case4_dist", "case4_radial"];

pub fn cases_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../cases")
}

pub fn fixture(name: &str) -> NetworkCase {
    let path = cases_dir().join(format!("{name}.m"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    parse_matpower_case(&text).unwrap()
}

pub fn solved(name: &str) -> (NetworkCase, AdmittanceMatrix, OperatingPoint) {
    let case = fixture(name);
    let y = build_admittance(&case).unwrap();
    let point = solve_newton_raphson(&case, &SolveOptions { tol: 1e-11, ..Default::default() }).unwrap();
    (case, y, point)
}
