//! The six pipelines behind the subcommands.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{PerturbationKind, Plan, RunConfig, SpectrumOperator, StateKind, SweepJob};
use super::output::{field_columns, to_json_line, write_json, write_text, Cell, Table};
use crate::dynamics::{decay_rate, evolve, max_admissible_dt, principal_perturbation, random_perturbation, DecayFit};
use crate::elliptic::{solve_logistic, uniqueness_probe, LogisticSolution, ProbeStart};
use crate::error::{Error, Result};
use crate::grid::{assemble_operator, Field};
use crate::linstab::{
    assemble_jacobian, coupled_spectrum, mode_ratios, s_parameter, verify_theorem, ModeRatios, StabilityReport,
    Verdict, SECOND_BRANCH_S,
};
use crate::model::{predator_only_state, prey_only_state, synchronized_state};
use crate::spectral::eigenpairs;

/// Exit code and one-line message of a finished command.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub message: String,
}

impl Outcome {
    fn ok(message: String) -> Self {
        Outcome { code: 0, message }
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_SUBCRITICAL: i32 = 2;

fn prepare_out(cfg: &RunConfig) -> Result<&Path> {
    let out = cfg.out.as_path();
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_json(&out.join("config.json"), cfg)?;
    Ok(out)
}

/// Subcritical growth: exit 2 with the threshold in the message.
fn subcritical(cfg: &RunConfig, plan: &Plan, lambda1: f64) -> Result<Outcome> {
    #[derive(Serialize)]
    struct Sub {
        status: &'static str,
        lambda1_of_a: f64,
    }
    write_json(
        &cfg.out.join("summary.json"),
        &Sub {
            status: "subcritical",
            lambda1_of_a: lambda1,
        },
    )?;
    let message = if plan.params.a.min() == plan.params.a.max() {
        let lap = lambda1 + plan.params.a.max();
        format!("subcritical: a ≤ λ₁ ≈ {lap:.10}")
    } else {
        format!("subcritical: λ₁(a) = {lambda1:.10} ≥ 0")
    };
    Ok(Outcome {
        code: EXIT_SUBCRITICAL,
        message,
    })
}

/// Solves for θ, or returns the subcritical outcome.
fn theta_or_exit(cfg: &RunConfig, plan: &Plan) -> Result<std::result::Result<LogisticSolution, Outcome>> {
    match solve_logistic(&plan.grid, &plan.params.a, cfg.tol) {
        Ok(t) => Ok(Ok(t)),
        Err(Error::Subcritical { lambda1 }) => Ok(Err(subcritical(cfg, plan, lambda1)?)),
        Err(e) => Err(e),
    }
}

pub fn cmd_theta(cfg: &RunConfig, plan: &Plan) -> Result<Outcome> {
    let out = prepare_out(cfg)?;
    let theta = match theta_or_exit(cfg, plan)? {
        Ok(t) => t,
        Err(o) => return Ok(o),
    };
    field_columns(plan.grid.dim(), &[("value", &theta.theta)]).write(out, "theta", cfg.format)?;

    #[derive(Serialize)]
    struct Summary {
        status: &'static str,
        lambda1_of_a: f64,
        residual_norm: f64,
        newton_iterations: usize,
        theta_max: f64,
        theta_min: f64,
        nodes: usize,
    }
    write_json(
        &out.join("summary.json"),
        &Summary {
            status: "ok",
            lambda1_of_a: theta.lambda1_of_a,
            residual_norm: theta.residual_norm,
            newton_iterations: theta.newton_iterations,
            theta_max: theta.theta.max(),
            theta_min: theta.theta.min(),
            nodes: plan.grid.len(),
        },
    )?;

    if cfg.probe_starts > 0 {
        let probe = uniqueness_probe(&plan.grid, &plan.params.a, cfg.probe_starts, cfg.tol, cfg.seed)?;
        #[derive(Serialize)]
        struct Probe<'a> {
            distinct_positive: usize,
            non_convergent: usize,
            threshold: f64,
            starts: &'a [ProbeStart],
        }
        write_json(
            &out.join("probe.json"),
            &Probe {
                distinct_positive: probe.distinct_positive(),
                non_convergent: probe.non_convergent(),
                threshold: probe.threshold,
                starts: &probe.starts,
            },
        )?;
    }
    Ok(Outcome::ok(format!(
        "θ: max {:.10}, residual {:.3e}, {} Newton steps",
        theta.theta.max(),
        theta.residual_norm,
        theta.newton_iterations
    )))
}

pub fn cmd_steady(cfg: &RunConfig, plan: &Plan) -> Result<Outcome> {
    let out = prepare_out(cfg)?;
    let theta = match theta_or_exit(cfg, plan)? {
        Ok(t) => t,
        Err(o) => return Ok(o),
    };
    let state = synchronized_state(&plan.params, &theta)?;
    field_columns(
        plan.grid.dim(),
        &[("u", &state.u), ("v", &state.v), ("theta", &state.theta)],
    )
    .write(out, "steady", cfg.format)?;
    let summary = state.summary(&plan.params, theta.residual_norm)?;

    #[derive(Serialize)]
    struct Summary {
        status: &'static str,
        alpha: f64,
        beta: f64,
        s_value: f64,
        ratios: ModeRatios,
        residual_u: f64,
        residual_v: f64,
        logistic_residual: f64,
    }
    write_json(
        &out.join("summary.json"),
        &Summary {
            status: "ok",
            alpha: summary.alpha,
            beta: summary.beta,
            s_value: s_parameter(plan.params.b, plan.params.c)?,
            ratios: mode_ratios(plan.params.b, plan.params.c)?,
            residual_u: summary.residual_u,
            residual_v: summary.residual_v,
            logistic_residual: summary.logistic_residual,
        },
    )?;
    Ok(Outcome::ok(format!(
        "synchronized state: α = {:.10}, β = {:.10}, residuals ({:.3e}, {:.3e})",
        summary.alpha, summary.beta, summary.residual_u, summary.residual_v
    )))
}

pub fn cmd_spectrum(cfg: &RunConfig, plan: &Plan) -> Result<Outcome> {
    let out = prepare_out(cfg)?;
    let (grid, params) = (&plan.grid, &plan.params);
    let needs_theta = match cfg.operator {
        SpectrumOperator::Laplacian | SpectrumOperator::Growth => false,
        SpectrumOperator::BranchS | SpectrumOperator::BranchTwo => true,
        SpectrumOperator::Coupled => cfg.state != StateKind::Origin,
    };
    let theta = if needs_theta {
        match theta_or_exit(cfg, plan)? {
            Ok(t) => Some(t),
            Err(o) => return Ok(o),
        }
    } else {
        None
    };

    if cfg.operator == SpectrumOperator::Coupled {
        let (u, v) = match (cfg.state, &theta) {
            (StateKind::Origin, _) => (Field::zeros(grid), Field::zeros(grid)),
            (StateKind::PreyOnly, Some(t)) => prey_only_state(t),
            (StateKind::PredatorOnly, Some(t)) => predator_only_state(t),
            (StateKind::Synchronized, Some(t)) => {
                let s = synchronized_state(params, t)?;
                (s.u, s.v)
            }
            _ => unreachable!("θ is computed for every non-origin state"),
        };
        let jac = assemble_jacobian(&u, &v, params, grid)?;
        let k = (2 * cfg.k).min(jac.dim());
        let spec = coupled_spectrum(&jac, k, cfg.tol)?;
        let mut t = Table::new(&["index", "re", "im", "residual"]);
        for (i, m) in spec.modes.iter().enumerate() {
            t.push(vec![
                Cell::Int(i as i64 + 1),
                Cell::Float(m.mu.re),
                Cell::Float(m.mu.im),
                Cell::Float(m.residual),
            ]);
        }
        t.write(out, "spectrum", cfg.format)?;
        return Ok(Outcome::ok(format!(
            "coupled spectrum at {:?} state: μ₁ = {:.12}",
            cfg.state, spec.modes[0].mu.re
        )));
    }

    let weight = match (cfg.operator, &theta) {
        (SpectrumOperator::Laplacian, _) => Field::zeros(grid),
        (SpectrumOperator::Growth, _) => params.a.clone(),
        (SpectrumOperator::BranchS, Some(t)) => {
            let s = s_parameter(params.b, params.c)?;
            params.a.zip_with(&t.theta, |a, th| a - s * th)?
        }
        (SpectrumOperator::BranchTwo, Some(t)) => params.a.zip_with(&t.theta, |a, th| a - SECOND_BRANCH_S * th)?,
        _ => unreachable!("θ is computed for branch operators"),
    };
    let spec = eigenpairs(&assemble_operator(grid, &weight)?, cfg.k, cfg.tol)?;
    let mut t = Table::new(&["index", "lambda", "residual"]);
    for (i, p) in spec.pairs.iter().enumerate() {
        t.push(vec![
            Cell::Int(i as i64 + 1),
            Cell::Float(p.lambda),
            Cell::Float(p.residual),
        ]);
    }
    t.write(out, "spectrum", cfg.format)?;
    let names: Vec<String> = (1..=spec.pairs.len()).map(|i| format!("phi_{i}")).collect();
    let cols: Vec<(&str, &Field)> = names
        .iter()
        .map(String::as_str)
        .zip(spec.pairs.iter().map(|p| &p.phi))
        .collect();
    field_columns(grid.dim(), &cols).write(out, "eigenfunctions", cfg.format)?;
    Ok(Outcome::ok(format!("λ₁ = {:.12}", spec.pairs[0].lambda)))
}

pub fn cmd_verify(cfg: &RunConfig, plan: &Plan) -> Result<Outcome> {
    let out = prepare_out(cfg)?;
    let report = verify_theorem(&plan.params, &plan.grid, cfg.k, cfg.tol)?;
    write_json(&out.join("report.json"), &report)?;
    let table = report.eigen_table_csv();
    match cfg.format {
        super::output::Format::Csv => write_text(&out.join("eigen_table.csv"), &table)?,
        super::output::Format::Json => {
            let mut t = Table::new(&["i", "coupled_re", "coupled_im", "predicted", "rel_err"]);
            for (i, (c, p)) in report.coupled_eigs.iter().zip(&report.predicted_eigs).enumerate() {
                let rel = if p.abs() > 1e-12 {
                    (c.re - p).abs() / p.abs()
                } else {
                    (c.re - p).abs()
                };
                t.push(vec![
                    Cell::Int(i as i64 + 1),
                    Cell::Float(c.re),
                    Cell::Float(c.im),
                    Cell::Float(*p),
                    Cell::Float(rel),
                ]);
            }
            t.write(out, "eigen_table", cfg.format)?;
        }
    }
    Ok(verify_outcome(&report))
}

fn is_subcritical(report: &StabilityReport) -> bool {
    report
        .cause
        .as_deref()
        .is_some_and(|c| c.starts_with("no positive steady state"))
}

fn verify_outcome(report: &StabilityReport) -> Outcome {
    let flag = if report.degenerate {
        " (degenerate locus, s = 2)"
    } else if report.near_degenerate {
        " (near the degenerate locus)"
    } else {
        ""
    };
    match report.verdict {
        Verdict::Stable | Verdict::Unstable => Outcome::ok(format!(
            "{:?}{flag}: μ₁ = {:.12}, s = {:.12}, mismatch {:.3e}",
            report.verdict, report.mu1, report.s_value, report.max_rel_mismatch
        )),
        Verdict::Inconclusive => Outcome {
            code: if is_subcritical(report) {
                EXIT_SUBCRITICAL
            } else {
                EXIT_ERROR
            },
            message: format!(
                "inconclusive{flag}: {}",
                report.cause.as_deref().unwrap_or("unknown cause")
            ),
        },
    }
}

pub fn cmd_evolve(cfg: &RunConfig, plan: &Plan) -> Result<Outcome> {
    let out = prepare_out(cfg)?;
    let theta = match theta_or_exit(cfg, plan)? {
        Ok(t) => t,
        Err(o) => return Ok(o),
    };
    let params = &plan.params;
    let state = synchronized_state(params, &theta)?;
    let (u0, v0, mu1) = match cfg.perturbation {
        PerturbationKind::Principal => principal_perturbation(&state, params, cfg.amplitude)?,
        PerturbationKind::Random => {
            let (u, v) = random_perturbation(&state, cfg.amplitude, cfg.seed);
            let jac = assemble_jacobian(&state.u, &state.v, params, &plan.grid)?;
            let mu1 = coupled_spectrum(&jac, 1, cfg.tol)?.modes[0].mu.re;
            (u, v, mu1)
        }
    };
    let dt_max = max_admissible_dt(&u0, &v0, params);
    if cfg.dt > dt_max {
        return Err(Error::Config(format!(
            "dt = {} exceeds the admissible step {dt_max:.6e} at the initial state",
            cfg.dt
        )));
    }
    let traj = evolve(&u0, &v0, params, cfg.dt, cfg.t_end, cfg.store_every)?;

    let dist = traj.distances(&state.u, &state.v)?;
    let mut t = Table::new(&["t", "norm_u_dist", "norm_v_dist", "total_dist"]);
    for d in &dist {
        t.push(vec![
            Cell::Float(d.t),
            Cell::Float(d.u),
            Cell::Float(d.v),
            Cell::Float(d.total),
        ]);
    }
    t.write(out, "trajectory", cfg.format)?;
    if !cfg.snapshots.is_empty() {
        traj.write_snapshots(out.join("snapshots"), &cfg.snapshots)?;
    }

    let fit = decay_rate(&traj, &state);
    #[derive(Serialize)]
    struct Summary {
        scheme: &'static str,
        dt: f64,
        steps: usize,
        final_time: f64,
        final_distance: f64,
        mu1: f64,
        fit: Option<DecayFit>,
        fit_error: Option<String>,
        rate_relative_error: Option<f64>,
    }
    let final_distance = dist.last().map(|d| d.total).unwrap_or(f64::NAN);
    let (fit, fit_error) = match fit {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let rate_relative_error = fit.as_ref().map(|f| (f.rate + mu1).abs() / mu1.abs());
    let message = match &fit {
        Some(f) => format!(
            "decay rate {:.8} vs -μ₁ = {:.8} (r² = {:.6}), final distance {:.3e}",
            f.rate, -mu1, f.r_squared, final_distance
        ),
        None => format!("final distance {final_distance:.3e}; no decay fit"),
    };
    write_json(
        &out.join("decay.json"),
        &Summary {
            scheme: traj.method,
            dt: traj.dt,
            steps: traj.steps,
            final_time: traj.final_time(),
            final_distance,
            mu1,
            fit,
            fit_error,
            rate_relative_error,
        },
    )?;
    Ok(Outcome::ok(message))
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRecord {
    pub key: String,
    pub a: Option<f64>,
    pub b: f64,
    pub c: f64,
    pub n: usize,
    pub s: f64,
    pub mu1: f64,
    pub max_rel_mismatch: f64,
    pub verdict: Verdict,
    pub degenerate: bool,
    pub near_degenerate: bool,
    pub cause: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepSummary {
    pub jobs: usize,
    pub stable: usize,
    pub unstable: usize,
    pub inconclusive: usize,
    pub min_mu1: f64,
    pub non_stable: Vec<String>,
    pub near_degenerate: Vec<String>,
}

fn run_job(job: &SweepJob) -> (SweepRecord, f64) {
    let start = Instant::now();
    let cfg = &job.config;
    let a = match cfg.a {
        super::config::GrowthSpec::Constant(a) => Some(a),
        _ => None,
    };
    let s = s_parameter(cfg.b, cfg.c).unwrap_or(f64::NAN);
    let ratios = mode_ratios(cfg.b, cfg.c).ok();
    let result = cfg
        .validate()
        .and_then(|plan| verify_theorem(&plan.params, &plan.grid, cfg.k, cfg.tol));
    let record = match result {
        Ok(r) => SweepRecord {
            key: job.key(),
            a,
            b: cfg.b,
            c: cfg.c,
            n: cfg.n,
            s,
            mu1: r.mu1,
            max_rel_mismatch: r.max_rel_mismatch,
            verdict: r.verdict,
            degenerate: r.degenerate,
            near_degenerate: r.near_degenerate,
            cause: r.cause,
        },
        Err(e) => SweepRecord {
            key: job.key(),
            a,
            b: cfg.b,
            c: cfg.c,
            n: cfg.n,
            s,
            mu1: f64::NAN,
            max_rel_mismatch: f64::NAN,
            verdict: Verdict::Inconclusive,
            degenerate: ratios.is_some_and(|r| r.degenerate),
            near_degenerate: ratios.is_some_and(|r| r.near_degenerate),
            cause: Some(e.to_string()),
        },
    };
    (record, start.elapsed().as_secs_f64())
}

/// Runs every job of the sweep product. `results.jsonl` and `summary.json`
/// depend only on the configuration; wall times go to `timings.jsonl`.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<Outcome> {
    let jobs = cfg.sweep_jobs()?;
    eprintln!("sweep: {} jobs", jobs.len());
    let out = prepare_out(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let mut results: Vec<(SweepRecord, f64)> = pool.install(|| jobs.par_iter().map(run_job).collect());
    results.sort_by(|x, y| x.0.key.cmp(&y.0.key));

    let mut lines = String::new();
    let mut timings = String::new();
    for (rec, wall) in &results {
        lines.push_str(&to_json_line(rec)?);
        lines.push('\n');
        #[derive(Serialize)]
        struct Timing<'a> {
            key: &'a str,
            wall_seconds: f64,
        }
        timings.push_str(&to_json_line(&Timing {
            key: &rec.key,
            wall_seconds: *wall,
        })?);
        timings.push('\n');
    }
    write_text(&out.join("results.jsonl"), &lines)?;
    write_text(&out.join("timings.jsonl"), &timings)?;

    let count = |v: Verdict| results.iter().filter(|r| r.0.verdict == v).count();
    let summary = SweepSummary {
        jobs: results.len(),
        stable: count(Verdict::Stable),
        unstable: count(Verdict::Unstable),
        inconclusive: count(Verdict::Inconclusive),
        min_mu1: results
            .iter()
            .map(|r| r.0.mu1)
            .filter(|m| m.is_finite())
            .fold(f64::INFINITY, f64::min),
        non_stable: results
            .iter()
            .filter(|r| r.0.verdict != Verdict::Stable)
            .map(|r| r.0.key.clone())
            .collect(),
        near_degenerate: results
            .iter()
            .filter(|r| r.0.near_degenerate)
            .map(|r| r.0.key.clone())
            .collect(),
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(Outcome::ok(format!(
        "{} jobs: {} stable, {} unstable, {} inconclusive; min μ₁ = {:.10}",
        summary.jobs, summary.stable, summary.unstable, summary.inconclusive, summary.min_mu1
    )))
}
