//! Synthetic AMI time series: per-step load scaling, Newton-Raphson solves
//! and Gaussian sensor noise.

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netmodel::{build_admittance, BusKind, CaseError, NetworkCase};
use crate::numkit::fmt_machine;
use crate::observability::{k_of_alpha, ObservabilityError};
use crate::powerflow::{solve_from, OperatingPoint, PowerFlowError, Schedule, SolveOptions};
use crate::Mat;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("power flow failed at step {step}: {source}")]
    NoConvergence { step: usize, source: PowerFlowError },
    #[error("load shape: {0}")]
    BadShape(String),
    #[error(transparent)]
    PowerFactor(#[from] ObservabilityError),
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error("ami csv: {0}")]
    Csv(String),
}

/// m steps × n buses of voltage magnitude and net injections, per unit.
#[derive(Debug, Clone, PartialEq)]
pub struct AmiSeries {
    pub m: usize,
    pub n: usize,
    /// bus ids of the columns
    pub buses: Vec<i64>,
    pub v: Mat,
    pub p: Mat,
    pub q: Mat,
    pub noise_sigma: f64,
    pub seed: u64,
    pub step_minutes: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoadShape {
    Flat,
    Residential,
}

impl FromStr for LoadShape {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "flat" => Ok(LoadShape::Flat),
            "residential" => Ok(LoadShape::Residential),
            other => Err(format!("unknown load shape `{other}` (expected flat or residential)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PfSchedule {
    /// keep each bus's own q/p ratio
    Native,
    /// the same power factor on every load at every step
    Fixed(f64),
    /// one power factor per step
    PerStep(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    /// x·(1 + σ·ε)
    #[default]
    Relative,
    /// x + σ·ε
    Absolute,
}

/// Per-step load multipliers. `Residential` is a morning/evening double peak
/// with a little seeded ripple, clamped to [0.4, 1].
pub fn default_loadshape(m: usize, shape: LoadShape, seed: u64) -> Vec<f64> {
    match shape {
        LoadShape::Flat => vec![1.0; m],
        LoadShape::Residential => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ripple: Vec<(f64, f64, f64)> = (0..3)
                .map(|k| {
                    let freq = (k + 3) as f64;
                    (freq, rng.random_range(0.0..std::f64::consts::TAU), rng.random_range(0.01..0.03))
                })
                .collect();
            (0..m)
                .map(|t| {
                    let h = t as f64 / m.max(1) as f64;
                    let bump = |c: f64, w: f64| (-((h - c) / w).powi(2)).exp();
                    let base = 0.5 + 0.25 * bump(0.32, 0.08) + 0.45 * bump(0.79, 0.09);
                    let jitter: f64 =
                        ripple.iter().map(|(f, ph, a)| a * (std::f64::consts::TAU * f * h + ph).sin()).sum();
                    (base + jitter).clamp(0.4, 1.0)
                })
                .collect()
        }
    }
}

/// Everything `simulate_with` needs. `diversity` is the std of an extra
/// per-bus, per-step relative load factor so that loads do not move in
/// lockstep; `q_diversity` adds an independent factor on reactive power only
/// (ignored under a fixed or per-step power factor, where q follows p
/// exactly). Both use their own RNG stream.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub shape: Vec<f64>,
    pub pf: PfSchedule,
    pub noise_sigma: f64,
    pub noise_mode: NoiseMode,
    pub diversity: f64,
    pub q_diversity: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(shape: Vec<f64>) -> Self {
        SimConfig {
            shape,
            pf: PfSchedule::Native,
            noise_sigma: 0.005,
            noise_mode: NoiseMode::Relative,
            diversity: 0.0,
            q_diversity: 0.0,
            seed: 0,
        }
    }
}

/// Relative noise, no load diversity.
pub fn simulate_series(
    case: &NetworkCase,
    shape: &[f64],
    pf: &PfSchedule,
    noise_sigma: f64,
    seed: u64,
) -> Result<AmiSeries, SimError> {
    simulate_with(case, &SimConfig { pf: pf.clone(), noise_sigma, seed, ..SimConfig::new(shape.to_vec()) })
}

/// Drives the case through the load shape, recording PQ buses. Loads scale
/// with the multiplier, reactive power follows the power-factor schedule and
/// each step is warm-started from the previous one. Recorded p, q are the PQ
/// schedules (what the meters see), v the solved magnitudes; noise is added
/// afterwards.
pub fn simulate_with(case: &NetworkCase, cfg: &SimConfig) -> Result<AmiSeries, SimError> {
    let shape = &cfg.shape;
    if shape.is_empty() {
        return Err(SimError::BadShape("empty".into()));
    }
    if let Some(t) = shape.iter().position(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(SimError::BadShape(format!("multiplier {} at step {t} is not positive", shape[t])));
    }
    if let PfSchedule::PerStep(a) = &cfg.pf {
        if a.len() != shape.len() {
            return Err(SimError::BadShape(format!("{} power factors for {} steps", a.len(), shape.len())));
        }
    }
    if !(cfg.noise_sigma >= 0.0) || !(cfg.diversity >= 0.0) || !(cfg.q_diversity >= 0.0) {
        return Err(SimError::BadShape("noise and diversity must be non-negative".into()));
    }
    let y = build_admittance(case)?;
    let base = Schedule::from_case(case);
    let pq = case.pq_indices();
    let (m, n) = (shape.len(), pq.len());
    let mut v = Mat::zeros(m, n);
    let mut p = Mat::zeros(m, n);
    let mut q = Mat::zeros(m, n);
    let opts = SolveOptions { tol: 1e-10, max_iter: 30, flat_start: true };
    let mut diversity_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut prev: Option<OperatingPoint> = None;
    for (t, &mult) in shape.iter().enumerate() {
        let mut sched = base.clone();
        let alpha = match &cfg.pf {
            PfSchedule::Native => None,
            PfSchedule::Fixed(a) => Some(*a),
            PfSchedule::PerStep(a) => Some(a[t]),
        };
        let k = alpha.map(k_of_alpha).transpose()?;
        for (i, bus) in case.buses.iter().enumerate() {
            let mut fp = mult;
            if cfg.diversity > 0.0 {
                fp *= (1.0 + cfg.diversity * unit.sample(&mut diversity_rng)).max(0.05);
            }
            let mut fq = fp;
            if cfg.q_diversity > 0.0 {
                fq *= (1.0 + cfg.q_diversity * unit.sample(&mut diversity_rng)).max(0.05);
            }
            let pl = bus.p_load * fp / case.base_mva;
            let ql = match k {
                None => bus.q_load * fq / case.base_mva,
                Some(k) => {
                    let sign = if bus.q_load < 0.0 { -1.0 } else { 1.0 };
                    sign * k * pl.abs()
                }
            };
            sched.p[i] += (bus.p_load / case.base_mva) - pl;
            sched.q[i] += (bus.q_load / case.base_mva) - ql;
        }
        let point = solve_from(case, &y, &sched, prev.as_ref(), &opts)
            .map_err(|source| SimError::NoConvergence { step: t, source })?;
        for (c, &i) in pq.iter().enumerate() {
            v[(t, c)] = point.v[i];
            p[(t, c)] = sched.p[i];
            q[(t, c)] = sched.q[i];
        }
        prev = Some(point);
    }
    if cfg.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let normal = Normal::new(0.0, cfg.noise_sigma).map_err(|e| SimError::BadShape(e.to_string()))?;
        for mat in [&mut v, &mut p, &mut q] {
            for x in mat.iter_mut() {
                let e = normal.sample(&mut rng);
                *x = match cfg.noise_mode {
                    NoiseMode::Relative => *x * (1.0 + e),
                    NoiseMode::Absolute => *x + e,
                };
            }
        }
    }
    Ok(AmiSeries {
        m,
        n,
        buses: pq.iter().map(|&i| case.buses[i].id).collect(),
        v,
        p,
        q,
        noise_sigma: cfg.noise_sigma,
        seed: cfg.seed,
        step_minutes: 24.0 * 60.0 / m as f64,
    })
}

impl AmiSeries {
    /// Column positions of the series buses inside `case`, which must all be PQ.
    pub fn bus_positions(&self, case: &NetworkCase) -> Result<Vec<usize>, SimError> {
        let idx = case.index_of();
        self.buses
            .iter()
            .map(|id| match idx.get(id) {
                Some(&k) if case.buses[k].kind == BusKind::Pq => Ok(k),
                Some(_) => Err(SimError::Csv(format!("bus {id} is not a PQ bus of the case"))),
                None => Err(SimError::Csv(format!("bus {id} is not in the case"))),
            })
            .collect()
    }
}

/// Long form, header `t,bus,v,p,q`, one row per bus per step.
pub fn write_ami_csv(series: &AmiSeries) -> String {
    let mut out = String::from("t,bus,v,p,q\n");
    for t in 0..series.m {
        for (c, id) in series.buses.iter().enumerate() {
            out.push_str(&format!(
                "{t},{id},{},{},{}\n",
                fmt_machine(series.v[(t, c)]),
                fmt_machine(series.p[(t, c)]),
                fmt_machine(series.q[(t, c)])
            ));
        }
    }
    out
}

pub fn read_ami_csv(text: &str) -> Result<AmiSeries, SimError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| SimError::Csv("empty file".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != ["t", "bus", "v", "p", "q"] {
        return Err(SimError::Csv(format!("expected header `t,bus,v,p,q`, got `{header}`")));
    }
    let mut rows: BTreeMap<(usize, i64), [f64; 3]> = BTreeMap::new();
    let mut buses: Vec<i64> = Vec::new();
    for (k, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = || SimError::Csv(format!("data row {}: `{line}`", k + 1));
        if f.len() != 5 {
            return Err(bad());
        }
        let t: usize = f[0].parse().map_err(|_| bad())?;
        let bus: i64 = f[1].parse().map_err(|_| bad())?;
        let vals =
            [f[2].parse().map_err(|_| bad())?, f[3].parse().map_err(|_| bad())?, f[4].parse().map_err(|_| bad())?];
        if !buses.contains(&bus) {
            buses.push(bus);
        }
        if rows.insert((t, bus), vals).is_some() {
            return Err(SimError::Csv(format!("duplicate row for t={t}, bus={bus}")));
        }
    }
    let steps: Vec<usize> = {
        let mut s: Vec<usize> = rows.keys().map(|(t, _)| *t).collect();
        s.dedup();
        s
    };
    let (m, n) = (steps.len(), buses.len());
    if rows.len() != m * n {
        return Err(SimError::Csv(format!("{} rows do not cover {m} steps × {n} buses", rows.len())));
    }
    let mut v = Mat::zeros(m, n);
    let mut p = Mat::zeros(m, n);
    let mut q = Mat::zeros(m, n);
    for (r, t) in steps.iter().enumerate() {
        for (c, bus) in buses.iter().enumerate() {
            let vals = rows.get(&(*t, *bus)).ok_or_else(|| SimError::Csv(format!("missing t={t}, bus={bus}")))?;
            v[(r, c)] = vals[0];
            p[(r, c)] = vals[1];
            q[(r, c)] = vals[2];
        }
    }
    Ok(AmiSeries { m, n, buses, v, p, q, noise_sigma: f64::NAN, seed: 0, step_minutes: 24.0 * 60.0 / m as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::parse_matpower_case;
    use crate::powerflow::solve_newton_raphson;

    fn case9() -> NetworkCase {
        parse_matpower_case(include_str!("../../../cases/case9.m")).unwrap()
    }

    #[test]
    fn load_shapes() {
        assert_eq!(default_loadshape(96, LoadShape::Flat, 1), vec![1.0; 96]);
        let r = default_loadshape(96, LoadShape::Residential, 3);
        assert!(r.iter().all(|&x| (0.4..=1.0).contains(&x)));
        assert_eq!(r, default_loadshape(96, LoadShape::Residential, 3));
        assert_ne!(r, default_loadshape(96, LoadShape::Residential, 4));
        let peak = r.iter().cloned().fold(0.0, f64::max);
        assert!(peak > 0.85);
    }

    #[test]
    fn flat_noiseless_rows_equal_base_solution() {
        let case = case9();
        let s = simulate_series(&case, &[1.0; 4], &PfSchedule::Native, 0.0, 0).unwrap();
        let base = solve_newton_raphson(&case, &SolveOptions { tol: 1e-10, ..Default::default() }).unwrap();
        for (c, &i) in case.pq_indices().iter().enumerate() {
            for t in 0..4 {
                assert!((s.v[(t, c)] - base.v[i]).abs() < 1e-10);
            }
        }
        assert_eq!(s.buses, vec![4, 5, 6, 7, 8, 9]);
    }

    #[test]
    fn fixed_power_factor_is_exact() {
        let case = case9();
        let shape = default_loadshape(8, LoadShape::Residential, 1);
        let s = simulate_series(&case, &shape, &PfSchedule::Fixed(0.9), 0.0, 0).unwrap();
        for t in 0..8 {
            for c in 0..s.n {
                let (p, q) = (s.p[(t, c)], s.q[(t, c)]);
                if p != 0.0 {
                    assert!((p.abs() / p.hypot(q) - 0.9).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn noise_is_reproducible_and_sized() {
        let case = case9();
        let a = simulate_series(&case, &[1.0; 3], &PfSchedule::Native, 0.005, 11).unwrap();
        let b = simulate_series(&case, &[1.0; 3], &PfSchedule::Native, 0.005, 11).unwrap();
        assert_eq!(a, b);
        let c = simulate_series(&case, &[1.0; 3], &PfSchedule::Native, 0.005, 12).unwrap();
        assert_ne!(a.v, c.v);
    }

    #[test]
    fn bad_shapes_rejected() {
        let case = case9();
        assert!(matches!(simulate_series(&case, &[], &PfSchedule::Native, 0.0, 0), Err(SimError::BadShape(_))));
        assert!(matches!(
            simulate_series(&case, &[1.0, -1.0], &PfSchedule::Native, 0.0, 0),
            Err(SimError::BadShape(_))
        ));
        assert!(matches!(
            simulate_series(&case, &[30.0], &PfSchedule::Native, 0.0, 0),
            Err(SimError::NoConvergence { step: 0, .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let case = case9();
        let s = simulate_series(&case, &[1.0, 0.9], &PfSchedule::Native, 0.01, 5).unwrap();
        let text = write_ami_csv(&s);
        assert!(text.starts_with("t,bus,v,p,q\n0,4,"));
        let back = read_ami_csv(&text).unwrap();
        assert_eq!((back.v.clone(), back.p.clone(), back.q.clone(), back.buses.clone()), (s.v, s.p, s.q, s.buses));
        assert!(read_ami_csv("t,bus,v\n").is_err());
        assert!(read_ami_csv("t,bus,v,p,q\n0,1,1,0,0\n1,2,1,0,0\n").is_err());
    }
}
