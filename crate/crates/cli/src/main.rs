use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use pfsense::amisim::{
    default_loadshape, read_ami_csv, simulate_with, write_ami_csv, LoadShape, NoiseMode, PfSchedule, SimConfig,
};
use pfsense::estimation::estimate_from_series;
use pfsense::lowrank::{
    complete_nuclear, complete_rank_constrained, pq_groups, spectral_report, CompletionResult, MaskedMatrix,
    DEFAULT_DELTA, DEFAULT_ITERS, DEFAULT_LAMBDA, DEFAULT_RANK_ITERS, DEFAULT_TOL,
};
use pfsense::netmodel::{build_admittance, parse_case, NetworkCase};
use pfsense::numkit::{fmt_machine, read_matrix_csv, write_matrix_csv};
use pfsense::observability::{alpha_min_curve_for, check_case, report_csv, report_human, ObservabilityReport};
use pfsense::powerflow::{assemble_jacobian, solve_newton_raphson, BusSet, SolveOptions};
use pfsense::sensitivity::{
    invert_jacobian, perturb_and_observe, phasor_sensitivity_matrices, schur_sensitivities, VoltageSensitivities,
};
use pfsense::Mat;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "pfsense", version, about = "Voltage sensitivities and phaseless observability from power-flow cases")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
#[group(multiple = false)]
struct Format {
    /// machine-readable JSON
    #[arg(long)]
    json: bool,
    /// machine-readable CSV
    #[arg(long)]
    csv: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Newton-Raphson power flow; per-bus v, θ (deg), p, q
    Solve {
        #[arg(long)]
        case: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[command(flatten)]
        format: Format,
    },
    /// Wide sensitivity matrix [S_v_p | S_v_q] as matrix CSV
    Sensitivities {
        #[arg(long)]
        case: PathBuf,
        #[arg(long, default_value = "inverse", value_parser = ["inverse", "schur", "phasor", "perturb"])]
        route: String,
        #[arg(long, default_value = "pq")]
        bus_set: BusSet,
        /// perturbation size for the perturb route (pu)
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Assumption and theorem checks, one row per case
    Check {
        #[arg(long, required = true)]
        case: Vec<PathBuf>,
        #[arg(long, default_value = "pq")]
        bus_set: BusSet,
        #[command(flatten)]
        format: Format,
    },
    /// Smallest feasible power factor against the largest, as CSV
    Pfcurve {
        #[arg(long)]
        case: PathBuf,
        #[arg(long, default_value_t = 50)]
        grid: usize,
        #[arg(long, default_value = "pq")]
        bus_set: BusSet,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Phaseless injection estimates from an AMI series
    Estimate {
        #[arg(long)]
        case: PathBuf,
        #[arg(long)]
        series: PathBuf,
        #[arg(long)]
        per_bus_rmse: bool,
        #[arg(long, default_value = "nonslack")]
        bus_set: BusSet,
        #[command(flatten)]
        format: Format,
    },
    /// Synthetic AMI series as long-form CSV
    Simulate {
        #[arg(long)]
        case: PathBuf,
        #[arg(long, default_value_t = 96)]
        steps: usize,
        /// std of the measurement noise
        #[arg(long, default_value_t = 0.005)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "residential")]
        shape: LoadShape,
        /// `native` or a power factor in (0, 1]
        #[arg(long, default_value = "native")]
        pf: String,
        /// std of an extra per-bus load factor
        #[arg(long, default_value_t = 0.0)]
        diversity: f64,
        /// additive noise instead of relative
        #[arg(long)]
        additive: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Matrix completion; mask CSV has 1 for unknown entries
    Complete {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long, default_value_t = DEFAULT_LAMBDA)]
        lambda: f64,
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
        /// use the rank-constrained solver instead
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        /// where to write the completed matrix
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        format: Format,
    },
    /// Normalized singular values of S̃ and its p / q halves
    Spectral {
        #[arg(long, conflicts_with = "matrix", required_unless_present = "matrix")]
        case: Option<PathBuf>,
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long, default_value = "pq")]
        bus_set: BusSet,
        #[command(flatten)]
        format: Format,
    },
}

/// Failure after arguments parsed. `Reported` means the report already went
/// to stdout with the error inside it.
enum Failure {
    Domain(anyhow::Error),
    Reported,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Domain(e.into())
    }
}

type Run = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let json = match &cli.command {
        Command::Solve { format, .. }
        | Command::Check { format, .. }
        | Command::Estimate { format, .. }
        | Command::Complete { format, .. }
        | Command::Spectral { format, .. } => format.json,
        _ => false,
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Reported) => ExitCode::from(1),
        Err(Failure::Domain(e)) => {
            if json {
                println!("{}", serde_json::json!({ "error": format!("{e:#}") }));
            } else {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(1)
        }
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_case(path: &Path) -> anyhow::Result<NetworkCase> {
    let mut case = parse_case(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    if case.name.is_empty() {
        case.name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    }
    Ok(case)
}

fn load_matrix(path: &Path) -> anyhow::Result<Mat> {
    read_matrix_csv(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(x: &T) -> String {
    serde_json::to_string_pretty(x).expect("report serializes") + "\n"
}

fn run(cmd: Command) -> Run {
    match cmd {
        Command::Solve { case, tol, format } => solve(&case, tol, format),
        Command::Sensitivities { case, route, bus_set, eps, out } => {
            sensitivities(&case, &route, bus_set, eps, out.as_deref())
        }
        Command::Check { case, bus_set, format } => check(&case, bus_set, format),
        Command::Pfcurve { case, grid, bus_set, out } => pfcurve(&case, grid, bus_set, out.as_deref()),
        Command::Estimate { case, series, per_bus_rmse, bus_set, format } => {
            estimate(&case, &series, per_bus_rmse, bus_set, format)
        }
        Command::Simulate { case, steps, noise, seed, shape, pf, diversity, additive, out } => {
            let case = load_case(&case)?;
            let pf = match pf.as_str() {
                "native" => PfSchedule::Native,
                a => PfSchedule::Fixed(a.parse().with_context(|| format!("power factor `{a}`"))?),
            };
            let cfg = SimConfig {
                pf,
                noise_sigma: noise,
                noise_mode: if additive { NoiseMode::Absolute } else { NoiseMode::Relative },
                diversity,
                seed,
                ..SimConfig::new(default_loadshape(steps, shape, seed))
            };
            emit(out.as_deref(), &write_ami_csv(&simulate_with(&case, &cfg)?))?;
            Ok(())
        }
        Command::Complete { matrix, mask, lambda, delta, rank, truth, iters, tol, out, format } => {
            complete(&matrix, &mask, lambda, delta, rank, truth.as_deref(), iters, tol, out.as_deref(), format)
        }
        Command::Spectral { case, matrix, bus_set, format } => {
            let s = match (case, matrix) {
                (Some(c), _) => wide_at_solution(&load_case(&c)?, bus_set)?,
                (None, Some(m)) => load_matrix(&m)?,
                (None, None) => unreachable!("clap requires one source"),
            };
            let rep = spectral_report(&s, &pq_groups(s.nrows()))?;
            if format.json {
                print!("{}", to_json(&rep));
            } else {
                let mut out = String::from("group,index,sigma,normalized\n");
                for g in std::iter::once(&rep.full).chain(&rep.groups) {
                    for (i, (s, n)) in g.sigma.iter().zip(&g.normalized).enumerate() {
                        out.push_str(&format!("{},{},{},{}\n", g.name, i + 1, fmt_machine(*s), fmt_machine(*n)));
                    }
                }
                print!("{out}");
            }
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct SolveReport<'a> {
    case: &'a str,
    converged: bool,
    iterations: usize,
    mismatch_norm: f64,
    buses: Vec<BusRow>,
}

#[derive(Serialize)]
struct BusRow {
    bus: i64,
    v: f64,
    theta_deg: f64,
    p: f64,
    q: f64,
}

fn solve(path: &Path, tol: f64, format: Format) -> Run {
    let case = load_case(path)?;
    let pt = solve_newton_raphson(&case, &SolveOptions { tol, ..Default::default() })?;
    let rows: Vec<BusRow> = case
        .buses
        .iter()
        .enumerate()
        .map(|(i, b)| BusRow {
            bus: b.id,
            v: pt.v[i],
            theta_deg: pt.theta[i].to_degrees(),
            p: pt.p_inj[i],
            q: pt.q_inj[i],
        })
        .collect();
    let rep = SolveReport {
        case: &case.name,
        converged: pt.converged,
        iterations: pt.iterations,
        mismatch_norm: pt.mismatch_norm,
        buses: rows,
    };
    if format.json {
        print!("{}", to_json(&rep));
    } else if format.csv {
        let mut out = String::from("bus,v,theta_deg,p,q\n");
        for r in &rep.buses {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.bus,
                fmt_machine(r.v),
                fmt_machine(r.theta_deg),
                fmt_machine(r.p),
                fmt_machine(r.q)
            ));
        }
        print!("{out}");
    } else {
        println!("{}: converged in {} iterations, mismatch {:.3e}", rep.case, rep.iterations, rep.mismatch_norm);
        println!("{:>6} {:>9} {:>10} {:>10} {:>10}", "bus", "v", "θ (deg)", "p", "q");
        for r in &rep.buses {
            println!("{:>6} {:>9.5} {:>10.4} {:>10.5} {:>10.5}", r.bus, r.v, r.theta_deg, r.p, r.q);
        }
    }
    Ok(())
}

fn wide_at_solution(case: &NetworkCase, bus_set: BusSet) -> anyhow::Result<Mat> {
    let y = build_admittance(case)?;
    let pt = solve_newton_raphson(case, &SolveOptions::default())?;
    let j = assemble_jacobian(case, &y, &pt, bus_set)?;
    Ok(invert_jacobian(&j)?.s_wide)
}

fn sensitivities(path: &Path, route: &str, bus_set: BusSet, eps: f64, out: Option<&Path>) -> Run {
    let case = load_case(path)?;
    let y = build_admittance(&case)?;
    let pt = solve_newton_raphson(&case, &SolveOptions::default())?;
    let s: VoltageSensitivities = match route {
        "inverse" => invert_jacobian(&assemble_jacobian(&case, &y, &pt, bus_set)?)?.magnitude(),
        "schur" => schur_sensitivities(&assemble_jacobian(&case, &y, &pt, bus_set)?)?,
        "phasor" => phasor_sensitivity_matrices(&case, &y, &pt)?,
        _ => perturb_and_observe(&case, &y, &pt, eps)?,
    };
    emit(out, &write_matrix_csv(&s.wide()))?;
    Ok(())
}

fn check(paths: &[PathBuf], bus_set: BusSet, format: Format) -> Run {
    let mut rows: Vec<ObservabilityReport> = Vec::new();
    for p in paths {
        let case = load_case(p)?;
        rows.push(check_case(&case.name, &case, bus_set));
    }
    let text = if format.json {
        if rows.len() == 1 {
            to_json(&rows[0])
        } else {
            to_json(&rows)
        }
    } else if format.csv {
        report_csv(&rows)
    } else {
        report_human(&rows)
    };
    print!("{text}");
    if rows.iter().any(|r| r.annotation.is_some()) {
        return Err(Failure::Reported);
    }
    Ok(())
}

fn pfcurve(path: &Path, grid: usize, bus_set: BusSet, out: Option<&Path>) -> Run {
    if grid == 0 {
        return Err(anyhow::anyhow!("--grid must be at least 1").into());
    }
    let case = load_case(path)?;
    let row = check_case(&case.name, &case, bus_set);
    if let Some(note) = row.annotation {
        return Err(anyhow::anyhow!(note).into());
    }
    let alphas: Vec<f64> = (1..=grid).map(|i| i as f64 / grid as f64).collect();
    let mut text = String::from("alpha_max,alpha_min\n");
    for (a, b) in alpha_min_curve_for(row.bound_strict, &alphas)? {
        text.push_str(&format!("{},{}\n", fmt_machine(a), fmt_machine(b)));
    }
    emit(out, &text)?;
    Ok(())
}

fn estimate(case: &Path, series: &Path, per_bus: bool, bus_set: BusSet, format: Format) -> Run {
    let case = load_case(case)?;
    let series = read_ami_csv(&read(series)?)?;
    let rep = estimate_from_series(&case, &series, bus_set)?;
    if format.json {
        print!("{}", to_json(&rep));
        return Ok(());
    }
    let mut out = String::new();
    if per_bus {
        out.push_str("bus,k,rmse_p,rmse_q\n");
        for (i, b) in rep.buses.iter().enumerate() {
            out.push_str(&format!(
                "{b},{},{},{}\n",
                fmt_machine(rep.k_diag[i]),
                fmt_machine(rep.rmse_p[i]),
                fmt_machine(rep.rmse_q[i])
            ));
        }
    } else {
        out.push_str("case,bus_set,steps,rmse_p,rmse_q,s_wide_rel_error\n");
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            rep.case,
            rep.bus_set,
            rep.steps,
            fmt_machine(rep.overall_rmse_p),
            fmt_machine(rep.overall_rmse_q),
            rep.s_wide_rel_error.map(fmt_machine).unwrap_or_else(|| "n/a".into())
        ));
    }
    print!("{out}");
    Ok(())
}

#[derive(Serialize)]
struct CompletionSummary {
    solver: &'static str,
    lambda: f64,
    delta: f64,
    rank: Option<usize>,
    known_fraction: f64,
    #[serde(flatten)]
    result: CompletionResult,
}

#[allow(clippy::too_many_arguments)]
fn complete(
    matrix: &Path,
    mask: &Path,
    lambda: f64,
    delta: f64,
    rank: Option<usize>,
    truth: Option<&Path>,
    iters: Option<usize>,
    tol: f64,
    out: Option<&Path>,
    format: Format,
) -> Run {
    let s0 = load_matrix(matrix)?;
    let m = load_matrix(mask)?;
    if m.shape() != s0.shape() {
        return Err(anyhow::anyhow!("mask is {:?}, matrix {:?}", m.shape(), s0.shape()).into());
    }
    if let Some(x) = m.iter().find(|&&x| x != 0.0 && x != 1.0) {
        return Err(anyhow::anyhow!("mask entries must be 0 or 1, found {x}").into());
    }
    let mm = MaskedMatrix::new(&s0, m.map(|x| x == 1.0))?;
    let mut result = match rank {
        Some(r) => complete_rank_constrained(&mm, r, iters.unwrap_or(DEFAULT_RANK_ITERS), tol)?,
        None => complete_nuclear(&mm, lambda, delta, iters.unwrap_or(DEFAULT_ITERS), tol)?,
    };
    if let Some(t) = truth {
        result = result.with_reference(&load_matrix(t)?);
    }
    if let Some(p) = out {
        emit(Some(p), &write_matrix_csv(&result.s_hat))?;
    }
    let summary = CompletionSummary {
        solver: if rank.is_some() { "rank" } else { "nuclear" },
        lambda,
        delta,
        rank,
        known_fraction: mm.known_fraction,
        result,
    };
    if format.json {
        print!("{}", to_json(&summary));
    } else {
        let r = &summary.result;
        println!("solver,iterations,converged,final_objective,rel_fro_error");
        println!(
            "{},{},{},{},{}",
            summary.solver,
            r.iterations,
            r.converged,
            r.objective_trace.last().copied().map(fmt_machine).unwrap_or_else(|| "n/a".into()),
            r.rel_fro_error_vs_reference.map(fmt_machine).unwrap_or_else(|| "n/a".into())
        );
        if out.is_none() {
            print!("{}", write_matrix_csv(&r.s_hat));
        }
    }
    Ok(())
}
