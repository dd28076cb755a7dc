//! Low-rank recovery of sensitivity matrices: hard-impute completion,
//! nuclear-norm completion and regression by projected proximal gradient,
//! the online smoothed estimator and singular-value reports.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimation::AmiDeltas;
use crate::numkit::{nuclear_norm, singular_values, svd, svt, truncate};
use crate::{Mat, Vector};

pub const DEFAULT_LAMBDA: f64 = 0.125;
pub const DEFAULT_DELTA: f64 = 0.06;
pub const DEFAULT_ITERS: usize = 1000;
pub const DEFAULT_RANK_ITERS: usize = 200;
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LowRankError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("rank {r} exceeds min dimension {max}")]
    RankTooLarge { r: usize, max: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("column group {0} is empty")]
    EmptyGroup(usize),
}

/// Partially known matrix. `omega` marks the UNKNOWN entries; `s0` is zero there.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedMatrix {
    pub s0: Mat,
    pub omega: DMatrix<bool>,
    pub known_fraction: f64,
}

impl MaskedMatrix {
    /// Zeroes `values` on `omega`.
    pub fn new(values: &Mat, omega: DMatrix<bool>) -> Result<Self, LowRankError> {
        if values.shape() != omega.shape() {
            return Err(LowRankError::DimensionMismatch(format!(
                "values {:?} vs mask {:?}",
                values.shape(),
                omega.shape()
            )));
        }
        let s0 = Mat::from_fn(values.nrows(), values.ncols(), |r, c| if omega[(r, c)] { 0.0 } else { values[(r, c)] });
        let hidden = omega.iter().filter(|&&u| u).count();
        let total = omega.len().max(1);
        Ok(MaskedMatrix { s0, omega, known_fraction: 1.0 - hidden as f64 / total as f64 })
    }

    pub fn fully_known(values: &Mat) -> Self {
        Self::new(values, DMatrix::from_element(values.nrows(), values.ncols(), false)).expect("shapes match")
    }

    /// Keeps round(known_fraction·len) entries of `truth`, chosen uniformly.
    pub fn sample(truth: &Mat, known_fraction: f64, seed: u64) -> Result<Self, LowRankError> {
        if !(0.0..=1.0).contains(&known_fraction) {
            return Err(LowRankError::InvalidParameter(format!("known fraction {known_fraction}")));
        }
        let len = truth.len();
        let known = (known_fraction * len as f64).round() as usize;
        let mut idx: Vec<usize> = (0..len).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut omega = DMatrix::from_element(truth.nrows(), truth.ncols(), true);
        for &k in &idx[..known] {
            omega[k] = false;
        }
        Self::new(truth, omega)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.s0.shape()
    }

    /// P_K(a): entries of `a` on the known set, zero on Ω.
    pub fn known_part(&self, a: &Mat) -> Mat {
        Mat::from_fn(a.nrows(), a.ncols(), |r, c| if self.omega[(r, c)] { 0.0 } else { a[(r, c)] })
    }

    /// ‖P_K(a − s0)‖_F.
    pub fn known_deviation(&self, a: &Mat) -> f64 {
        self.known_part(&(a - &self.s0)).norm()
    }

    /// Pulls the known-entry deviation from s0 back onto the δ-ball.
    pub fn project(&self, a: &mut Mat, delta: f64) {
        if delta.is_infinite() {
            return;
        }
        let dev = self.known_deviation(a);
        if dev <= delta {
            return;
        }
        let scale = if dev > 0.0 { delta / dev } else { 0.0 };
        for r in 0..a.nrows() {
            for c in 0..a.ncols() {
                if !self.omega[(r, c)] {
                    a[(r, c)] = self.s0[(r, c)] + scale * (a[(r, c)] - self.s0[(r, c)]);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    #[serde(skip)]
    pub s_hat: Mat,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub rel_fro_error_vs_reference: Option<f64>,
}

impl CompletionResult {
    pub fn with_reference(mut self, truth: &Mat) -> Self {
        self.rel_fro_error_vs_reference = Some(rel_fro_error(&self.s_hat, truth));
        self
    }

    /// Largest increase between consecutive objective values (≤ 0 when monotone).
    pub fn max_objective_increase(&self) -> f64 {
        self.objective_trace.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn rel_fro_error(estimate: &Mat, truth: &Mat) -> f64 {
    (estimate - truth).norm() / truth.norm()
}

fn rel_change(new: &Mat, old: &Mat) -> f64 {
    let d = (new - old).norm();
    if d == 0.0 {
        0.0
    } else {
        d / old.norm().max(f64::MIN_POSITIVE)
    }
}

fn check_params(lambda: f64, delta: f64) -> Result<(), LowRankError> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(LowRankError::InvalidParameter(format!("lambda = {lambda}")));
    }
    if !(delta >= 0.0) {
        return Err(LowRankError::InvalidParameter(format!("delta = {delta}")));
    }
    Ok(())
}

/// Hard-impute: fill Ω from the current estimate, truncate to rank r, restore
/// the known entries. Fills are extrapolated along the last change and the
/// extrapolation is dropped whenever it would raise ‖P_K(Z − s0)‖_F², which
/// the trace records per iteration.
pub fn complete_rank_constrained(
    mm: &MaskedMatrix,
    r: usize,
    iters: usize,
    tol: f64,
) -> Result<CompletionResult, LowRankError> {
    let (rows, cols) = mm.shape();
    if r > rows.min(cols) {
        return Err(LowRankError::RankTooLarge { r, max: rows.min(cols) });
    }
    let step = |fill: &Mat| {
        let z = truncate(&svd(fill), r);
        let obj = mm.known_part(&(&z - &mm.s0)).norm_squared();
        (&mm.s0 + (&z - mm.known_part(&z)), obj)
    };
    let mut x = mm.s0.clone();
    let mut x_prev = x.clone();
    let mut obj = f64::INFINITY;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut k = 0.0f64;
    while iterations < iters {
        iterations += 1;
        let beta = k / (k + 3.0);
        let (mut next, mut next_obj) = step(&(&x + beta * (&x - &x_prev)));
        k += 1.0;
        if beta > 0.0 && next_obj > obj {
            (next, next_obj) = step(&x);
            k = 0.0;
        }
        let change = rel_change(&next, &x);
        x_prev = std::mem::replace(&mut x, next);
        obj = next_obj;
        trace.push(obj);
        if change < tol {
            converged = true;
            break;
        }
    }
    Ok(CompletionResult { s_hat: x, objective_trace: trace, iterations, converged, rel_fro_error_vs_reference: None })
}

/// Smooth part of a composite objective.
struct Smooth<'a> {
    value: Box<dyn Fn(&Mat) -> f64 + 'a>,
    grad: Box<dyn Fn(&Mat) -> Mat + 'a>,
    lipschitz: f64,
}

/// Accelerated projected proximal gradient on f(S) + λ‖S‖_* over the δ-ball
/// of known-entry deviations. A step is only accepted if it does not raise
/// the objective: an extrapolated step falls back to a plain one, and a
/// plain one to a backtracked segment, so the trace is nonincreasing.
fn projected_prox(
    start: Mat,
    f: &Smooth,
    lambda: f64,
    delta: f64,
    mm: &MaskedMatrix,
    iters: usize,
    tol: f64,
) -> CompletionResult {
    let step = if f.lipschitz > 0.0 { 1.0 / f.lipschitz } else { 1.0 };
    let objective = |s: &Mat| (f.value)(s) + if lambda > 0.0 { lambda * nuclear_norm(s) } else { 0.0 };
    let prox = |y: &Mat| {
        let z = y - step * (f.grad)(y);
        let mut s = if lambda > 0.0 { svt(&z, lambda * step) } else { z };
        mm.project(&mut s, delta);
        s
    };
    let mut x = start;
    mm.project(&mut x, delta);
    let mut obj = objective(&x);
    let mut trace = vec![obj];
    let mut x_prev = x.clone();
    let mut t = 1.0f64;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < iters {
        iterations += 1;
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let y = &x + ((t - 1.0) / t_next) * (&x - &x_prev);
        let mut cand = prox(&y);
        let mut cand_obj = objective(&cand);
        let mut t_after = t_next;
        if cand_obj > obj {
            cand = prox(&x);
            cand_obj = objective(&cand);
            t_after = 1.0;
        }
        let mut theta = 0.5;
        while cand_obj > obj && theta > 1e-6 {
            let trial = &x + theta * (&cand - &x);
            let trial_obj = objective(&trial);
            if trial_obj <= obj {
                cand = trial;
                cand_obj = trial_obj;
            }
            theta *= 0.5;
        }
        if cand_obj > obj {
            // no descent left at working precision
            converged = true;
            break;
        }
        let change = rel_change(&cand, &x);
        x_prev = std::mem::replace(&mut x, cand);
        obj = cand_obj;
        trace.push(obj);
        t = t_after;
        if change < tol {
            converged = true;
            break;
        }
    }
    CompletionResult { s_hat: x, objective_trace: trace, iterations, converged, rel_fro_error_vs_reference: None }
}

/// Warm start by continuation: a few loose solves with λ halving from
/// `lambda_start` down to the target, then the full solve at the target,
/// whose objective trace is the one reported. Small λ on its own moves the
/// unknown entries by O(λ) per step, which would stall the plain iteration.
fn continued_prox(
    f: &Smooth,
    lambda: f64,
    lambda_start: f64,
    delta: f64,
    mm: &MaskedMatrix,
    iters: usize,
    tol: f64,
) -> CompletionResult {
    let mut start = mm.s0.clone();
    let mut warm = 0;
    if lambda > 0.0 {
        let mut stage = lambda_start;
        while stage > 2.0 * lambda {
            let r = projected_prox(start, f, stage, delta, mm, CONTINUATION_ITERS, CONTINUATION_TOL);
            warm += r.iterations;
            start = r.s_hat;
            stage *= 0.5;
        }
    }
    let mut out = projected_prox(start, f, lambda, delta, mm, iters, tol);
    out.iterations += warm;
    out
}

const CONTINUATION_ITERS: usize = 200;
const CONTINUATION_TOL: f64 = 1e-6;

/// min ‖P_K(s0 − S)‖_F² + λ‖S‖_* with ‖P_K(S − s0)‖_F ≤ δ, starting at s0.
/// The gradient step with step ½ is Z = P_K(s0) + P_Ω(S).
pub fn complete_nuclear(
    mm: &MaskedMatrix,
    lambda: f64,
    delta: f64,
    iters: usize,
    tol: f64,
) -> Result<CompletionResult, LowRankError> {
    check_params(lambda, delta)?;
    let f = Smooth {
        value: Box::new(|s: &Mat| mm.known_part(&(&mm.s0 - s)).norm_squared()),
        grad: Box::new(|s: &Mat| 2.0 * mm.known_part(&(s - &mm.s0))),
        lipschitz: 2.0,
    };
    let top = singular_values(&mm.s0).first().copied().unwrap_or(0.0);
    Ok(continued_prox(&f, lambda, 2.0 * top, delta, mm, iters, tol))
}

/// min ‖S·dXᵀ − dVᵀ‖_F² + λ‖S‖_* with the same known-entry constraint.
pub fn fit_partial_nuclear(
    deltas: &AmiDeltas,
    mm: &MaskedMatrix,
    lambda: f64,
    delta: f64,
    iters: usize,
    tol: f64,
) -> Result<CompletionResult, LowRankError> {
    check_params(lambda, delta)?;
    let (n, w) = (deltas.dv.ncols(), deltas.dx.ncols());
    if mm.shape() != (n, w) || deltas.dx.nrows() != deltas.dv.nrows() {
        return Err(LowRankError::DimensionMismatch(format!(
            "mask {:?}, dV {:?}, dX {:?}",
            mm.shape(),
            deltas.dv.shape(),
            deltas.dx.shape()
        )));
    }
    let dx = &deltas.dx;
    let dvt = deltas.dv.transpose();
    let gram = dx.transpose() * dx;
    let lipschitz = 2.0 * svd(&gram).sigma.first().copied().unwrap_or(0.0);
    let f = Smooth {
        value: Box::new(|s: &Mat| (s * dx.transpose() - &dvt).norm_squared()),
        grad: Box::new(|s: &Mat| 2.0 * (s * dx.transpose() - &dvt) * dx),
        lipschitz,
    };
    let top = singular_values(&(2.0 * &deltas.dv.transpose() * dx)).first().copied().unwrap_or(0.0);
    Ok(continued_prox(&f, lambda, top, delta, mm, iters, tol))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnlineOptions {
    pub lambda: f64,
    pub c: f64,
    pub gamma: f64,
    pub delta: f64,
    pub iters: usize,
    pub tol: f64,
}

impl Default for OnlineOptions {
    fn default() -> Self {
        OnlineOptions { lambda: 1.25e-4, c: 1e-8, gamma: 0.9, delta: DEFAULT_DELTA, iters: 500, tol: DEFAULT_TOL }
    }
}

/// Running state of the online estimator. The discounted history
/// Σ_{s≥1} γ^s‖Ŝ_{t−s} − S‖² is carried as w = Σγ^s and h = Σγ^s·Ŝ_{t−s}.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineState {
    pub mask: MaskedMatrix,
    pub s_hat: Mat,
    pub w: f64,
    pub h: Mat,
    pub t: usize,
    pub last_converged: bool,
    pub last_iterations: usize,
}

impl OnlineState {
    /// Starts from the known entries.
    pub fn new(mask: MaskedMatrix) -> Self {
        let (r, c) = mask.shape();
        OnlineState {
            s_hat: mask.s0.clone(),
            h: Mat::zeros(r, c),
            mask,
            w: 0.0,
            t: 0,
            last_converged: true,
            last_iterations: 0,
        }
    }

    /// h/w, the exponentially smoothed past estimate (None before any update).
    pub fn smoothed(&self) -> Option<Mat> {
        (self.w > 0.0).then(|| &self.h / self.w)
    }

    pub fn predict(&self, dx: &[f64]) -> Vec<f64> {
        (&self.s_hat * Vector::from_column_slice(dx)).as_slice().to_vec()
    }
}

/// One step: min ‖dv − S·dx‖² + λ‖S‖_* + c·Σγ^s‖Ŝ_{t−s} − S‖_F², warm-started
/// from the previous estimate.
pub fn online_update(
    state: &OnlineState,
    dv: &[f64],
    dx: &[f64],
    opts: &OnlineOptions,
) -> Result<(Mat, OnlineState), LowRankError> {
    check_params(opts.lambda, opts.delta)?;
    if !(opts.c >= 0.0) || !(opts.gamma > 0.0 && opts.gamma < 1.0) {
        return Err(LowRankError::InvalidParameter(format!("c = {}, gamma = {}", opts.c, opts.gamma)));
    }
    let (n, w) = state.mask.shape();
    if dv.len() != n || dx.len() != w {
        return Err(LowRankError::DimensionMismatch(format!(
            "dv {} / dx {} for a {n}×{w} estimate",
            dv.len(),
            dx.len()
        )));
    }
    let dv = Vector::from_column_slice(dv);
    let dx = Vector::from_column_slice(dx);
    let cw = opts.c * state.w;
    let h = &state.h;
    let f = Smooth {
        value: Box::new(|s: &Mat| {
            let hist = if cw > 0.0 { opts.c * (state.w * s.norm_squared() - 2.0 * h.dot(s)) } else { 0.0 };
            (&dv - s * &dx).norm_squared() + hist
        }),
        grad: Box::new(|s: &Mat| -2.0 * (&dv - s * &dx) * dx.transpose() + 2.0 * opts.c * (state.w * s - h)),
        lipschitz: 2.0 * dx.norm_squared() + 2.0 * cw,
    };
    let res = projected_prox(state.s_hat.clone(), &f, opts.lambda, opts.delta, &state.mask, opts.iters, opts.tol);
    let next = OnlineState {
        mask: state.mask.clone(),
        w: opts.gamma * (1.0 + state.w),
        h: opts.gamma * (&res.s_hat + &state.h),
        s_hat: res.s_hat.clone(),
        t: state.t + 1,
        last_converged: res.converged,
        last_iterations: res.iterations,
    };
    Ok((res.s_hat, next))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpectrum {
    pub name: String,
    pub columns: Vec<usize>,
    pub sigma: Vec<f64>,
    /// σ_k/σ_1 (zeros when σ_1 = 0)
    pub normalized: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub full: GroupSpectrum,
    pub groups: Vec<GroupSpectrum>,
}

fn spectrum(name: &str, a: &Mat, columns: Vec<usize>) -> GroupSpectrum {
    let sigma = svd(a).sigma;
    let top = sigma.first().copied().unwrap_or(0.0);
    let normalized = sigma.iter().map(|s| if top > 0.0 { s / top } else { 0.0 }).collect();
    GroupSpectrum { name: name.to_string(), columns, sigma, normalized }
}

/// [P columns, Q columns] of an n×2n wide matrix.
pub fn pq_groups(n: usize) -> Vec<(String, Vec<usize>)> {
    vec![("P".into(), (0..n).collect()), ("Q".into(), (n..2 * n).collect())]
}

/// Singular values of the whole matrix and of each named column group.
pub fn spectral_report(s: &Mat, groups: &[(String, Vec<usize>)]) -> Result<SpectralReport, LowRankError> {
    let mut out = Vec::with_capacity(groups.len());
    for (g, (name, cols)) in groups.iter().enumerate() {
        if cols.is_empty() {
            return Err(LowRankError::EmptyGroup(g));
        }
        if let Some(&bad) = cols.iter().find(|&&c| c >= s.ncols()) {
            return Err(LowRankError::DimensionMismatch(format!("column {bad} of a {}-column matrix", s.ncols())));
        }
        out.push(spectrum(name, &s.select_columns(cols.iter()), cols.clone()));
    }
    Ok(SpectralReport { full: spectrum("all", s, (0..s.ncols()).collect()), groups: out })
}

/// Picks the (λ, δ) pair with the lowest error against `truth`.
pub fn grid_search_nuclear(
    mm: &MaskedMatrix,
    truth: &Mat,
    lambdas: &[f64],
    deltas: &[f64],
    iters: usize,
    tol: f64,
) -> Result<(f64, f64, CompletionResult), LowRankError> {
    let mut best: Option<(f64, f64, CompletionResult)> = None;
    for &l in lambdas {
        for &d in deltas {
            let r = complete_nuclear(mm, l, d, iters, tol)?.with_reference(truth);
            let e = r.rel_fro_error_vs_reference.unwrap_or(f64::INFINITY);
            if best.as_ref().map_or(true, |(_, _, b)| e < b.rel_fro_error_vs_reference.unwrap_or(f64::INFINITY)) {
                best = Some((l, d, r));
            }
        }
    }
    best.ok_or_else(|| LowRankError::InvalidParameter("empty grid".into()))
}

/// A·Bᵀ with standard normal rows×r and cols×r factors.
pub fn planted_low_rank(rows: usize, cols: usize, r: usize, seed: u64) -> Mat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |m: usize| Mat::from_fn(m, r, |_, _| StandardNormal.sample(&mut rng));
    let a = draw(rows);
    let b = draw(cols);
    a * b.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_bookkeeping() {
        let truth = planted_low_rank(4, 8, 2, 1);
        let mm = MaskedMatrix::sample(&truth, 0.25, 3).unwrap();
        assert_eq!(mm.omega.iter().filter(|&&u| !u).count(), 8);
        assert!((mm.known_fraction - 0.25).abs() < 1e-15);
        for (k, &u) in mm.omega.iter().enumerate() {
            assert_eq!(mm.s0[k], if u { 0.0 } else { truth[k] });
        }
        assert!(MaskedMatrix::new(&truth, DMatrix::from_element(2, 2, true)).is_err());
        assert!(MaskedMatrix::sample(&truth, 1.5, 0).is_err());
    }

    #[test]
    fn projection_lands_on_ball() {
        let truth = planted_low_rank(3, 6, 1, 2);
        let mm = MaskedMatrix::sample(&truth, 0.5, 1).unwrap();
        let mut a = Mat::zeros(3, 6);
        mm.project(&mut a, 0.1);
        assert!((mm.known_deviation(&a) - 0.1).abs() < 1e-12);
        let mut b = Mat::from_element(3, 6, 7.0);
        mm.project(&mut b, 0.0);
        assert_eq!(mm.known_part(&b), mm.s0);
        assert!(mm.omega.iter().zip(b.iter()).all(|(&u, &x)| !u || x == 7.0));
    }

    #[test]
    fn rank_route_trivial_cases() {
        let truth = planted_low_rank(5, 10, 2, 4);
        let full = MaskedMatrix::fully_known(&truth);
        let r = complete_rank_constrained(&full, 2, DEFAULT_RANK_ITERS, DEFAULT_TOL).unwrap();
        assert!((&r.s_hat - &truth).amax() < 1e-10 && r.converged);
        let mm = MaskedMatrix::sample(&truth, 0.5, 4).unwrap();
        let zero = complete_rank_constrained(&mm, 0, 10, DEFAULT_TOL).unwrap();
        assert_eq!(zero.s_hat, mm.s0);
        assert!(matches!(complete_rank_constrained(&mm, 6, 10, 1e-8), Err(LowRankError::RankTooLarge { .. })));
    }

    #[test]
    fn nuclear_boundaries() {
        let truth = planted_low_rank(4, 8, 2, 5);
        let mm = MaskedMatrix::sample(&truth, 0.6, 5).unwrap();
        let r = complete_nuclear(&mm, 0.0, 0.0, 100, DEFAULT_TOL).unwrap();
        assert_eq!(r.s_hat, mm.s0);
        assert!(r.converged);
        let big = 2.0 * svd(&mm.s0).sigma[0];
        let r = complete_nuclear(&mm, big, 0.5, 200, DEFAULT_TOL).unwrap();
        assert!(mm.omega.iter().zip(r.s_hat.iter()).all(|(&u, &x)| !u || x.abs() < 1e-12));
        assert!(mm.known_deviation(&r.s_hat) <= 0.5 + 1e-12);
        assert!(r.max_objective_increase() <= 0.0);
        assert!(complete_nuclear(&mm, -1.0, 0.0, 1, 1e-8).is_err());
    }

    #[test]
    fn online_column_fit_and_heavy_smoothing() {
        let truth = planted_low_rank(3, 6, 1, 6);
        let mm = MaskedMatrix::new(&truth, DMatrix::from_element(3, 6, true)).unwrap();
        let st = OnlineState::new(mm);
        let opts = OnlineOptions { lambda: 0.0, c: 0.0, delta: f64::INFINITY, ..Default::default() };
        let mut e = vec![0.0; 6];
        e[2] = 1.0;
        let (s, st) = online_update(&st, &[1.0, 2.0, 3.0], &e, &opts).unwrap();
        assert_eq!(s.column(2).as_slice(), &[1.0, 2.0, 3.0]);
        assert_eq!(s.columns(0, 2).amax(), 0.0);
        assert!((st.w - 0.9).abs() < 1e-15);
        assert_eq!(st.smoothed().unwrap(), s);

        let heavy = OnlineOptions { c: 1e9, ..opts };
        let (s2, _) = online_update(&st, &[5.0, 5.0, 5.0], &[1.0; 6], &heavy).unwrap();
        assert!((&s2 - &s).amax() < 1e-6);
    }

    #[test]
    fn spectra() {
        let one = planted_low_rank(4, 8, 1, 9);
        let rep = spectral_report(&one, &pq_groups(4)).unwrap();
        assert!(rep.full.normalized[1] < 1e-12);
        assert_eq!(rep.groups.len(), 2);
        assert!(rep.full.sigma.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(spectral_report(&one, &[("x".into(), vec![])]), Err(LowRankError::EmptyGroup(0)));
        assert!(spectral_report(&one, &[("x".into(), vec![8])]).is_err());
    }
}
