//! Browser bindings. Each exported function takes plain numbers and strings
//! and returns a JSON string; `www/main.js` draws the results.

use pfsense::lowrank::{complete_nuclear, pq_groups, rel_fro_error, spectral_report, MaskedMatrix};
use pfsense::netmodel::{build_admittance, parse_matpower_case, NetworkCase};
use pfsense::observability::{alpha_min_curve_for, check_case, ObservabilityReport};
use pfsense::powerflow::{solve_newton_raphson, BusSet, SolveOptions};
use pfsense::sensitivity::sensitivities;
use pfsense::Mat;
use serde::Serialize;
use wasm_bindgen::prelude::*;

const CASES: [(&str, &str); 7] = [
    ("case4_dist", include_str!("../../../cases/case4_dist.m")),
    ("case4_radial", include_str!("../../../cases/case4_radial.m")),
    ("case5", include_str!("../../../cases/case5.m")),
    ("case9", include_str!("../../../cases/case9.m")),
    ("case14", include_str!("../../../cases/case14.m")),
    ("case24_ieee_rts", include_str!("../../../cases/case24_ieee_rts.m")),
    ("case30", include_str!("../../../cases/case30.m")),
];

fn case(name: &str) -> Result<NetworkCase, String> {
    let text = CASES.iter().find(|(n, _)| *n == name).ok_or_else(|| format!("no bundled case `{name}`"))?.1;
    parse_matpower_case(text).map_err(|e| e.to_string())
}

fn wide(case: &NetworkCase, bus_set: BusSet) -> Result<Mat, String> {
    let y = build_admittance(case).map_err(|e| e.to_string())?;
    let pt = solve_newton_raphson(case, &SolveOptions::default()).map_err(|e| e.to_string())?;
    Ok(sensitivities(case, &y, &pt, bus_set).map_err(|e| e.to_string())?.s_wide)
}

fn json<T: Serialize>(x: &T) -> String {
    serde_json::to_string(x).expect("serializable")
}

pub fn case_names() -> Vec<String> {
    CASES.iter().map(|(n, _)| n.to_string()).collect()
}

#[derive(Serialize)]
pub struct CurveOut {
    pub report: ObservabilityReport,
    pub alpha_max: Vec<f64>,
    pub alpha_min: Vec<f64>,
}

/// Theorem checks for a bundled case and the feasible power-factor curve
/// on `points` values of α_max in (0, 1].
pub fn alpha_curve_json(name: &str, points: usize) -> Result<String, String> {
    let c = case(name)?;
    let report = check_case(name, &c, BusSet::Pq);
    if let Some(note) = &report.annotation {
        return Err(note.clone());
    }
    let grid: Vec<f64> = (1..=points.max(2)).map(|i| i as f64 / points.max(2) as f64).collect();
    let curve = alpha_min_curve_for(report.bound_strict, &grid).map_err(|e| e.to_string())?;
    let (alpha_max, alpha_min) = curve.into_iter().unzip();
    Ok(json(&CurveOut { report, alpha_max, alpha_min }))
}

/// Normalized singular values of S̃ and of its p and q halves.
pub fn spectrum_json(name: &str, bus_set: &str) -> Result<String, String> {
    let set: BusSet = bus_set.parse()?;
    let s = wide(&case(name)?, set)?;
    let rep = spectral_report(&s, &pq_groups(s.nrows())).map_err(|e| e.to_string())?;
    Ok(json(&rep))
}

#[derive(Serialize)]
pub struct CompletionOut {
    pub rows: usize,
    pub cols: usize,
    pub known_fraction: f64,
    pub rel_error: f64,
    /// error of leaving the unknown entries at zero
    pub baseline_error: f64,
    pub iterations: usize,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
}

/// Hides all but `known_fraction` of the case's S̃ and completes it.
pub fn completion_json(name: &str, known_fraction: f64, lambda: f64, delta: f64, seed: u32) -> Result<String, String> {
    let s = wide(&case(name)?, BusSet::Pq)?;
    let mm = MaskedMatrix::sample(&s, known_fraction, seed as u64).map_err(|e| e.to_string())?;
    let r = complete_nuclear(&mm, lambda, delta, 1000, 1e-8).map_err(|e| e.to_string())?;
    Ok(json(&CompletionOut {
        rows: s.nrows(),
        cols: s.ncols(),
        known_fraction: mm.known_fraction,
        rel_error: rel_fro_error(&r.s_hat, &s),
        baseline_error: rel_fro_error(&mm.s0, &s),
        iterations: r.iterations,
        converged: r.converged,
        objective_trace: r.objective_trace,
    }))
}

#[wasm_bindgen]
pub fn cases() -> String {
    json(&case_names())
}

#[wasm_bindgen]
pub fn alpha_curve(name: &str, points: usize) -> Result<String, JsError> {
    alpha_curve_json(name, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn spectrum(name: &str, bus_set: &str) -> Result<String, JsError> {
    spectrum_json(name, bus_set).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn completion(name: &str, known_fraction: f64, lambda: f64, delta: f64, seed: u32) -> Result<String, JsError> {
    completion_json(name, known_fraction, lambda, delta, seed).map_err(|e| JsError::new(&e))
}
