//! The logistic steady-state problem `Δθ + θ(a - θ) = 0`, `θ = 0` on the boundary.
//!
//! A positive solution exists exactly when `λ₁(a) < 0`, i.e. when the
//! principal eigenvalue of `-(Δ + a)` is negative. [`solve_logistic`] checks
//! that first and then runs damped Newton from a scaled principal
//! eigenfunction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{assemble_operator, l2_norm, Field, Grid};
use crate::linalg::BandedLu;
use crate::spectral::{principal_eigenpair_with, EigenOptions};

/// Eigen tolerance used for the supercriticality check and the initial guess.
/// Only the sign of λ₁ and a rough shape are needed here.
const GUESS_EIGEN_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug)]
pub struct NewtonOptions {
    /// Target discrete L2 norm of `Δθ + θ(a - θ)`.
    pub tol: f64,
    pub max_iterations: usize,
    /// Step halvings tried before declaring divergence.
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-10,
            max_iterations: 60,
            max_halvings: 30,
        }
    }
}

impl NewtonOptions {
    pub fn with_tol(tol: f64) -> Self {
        NewtonOptions {
            tol,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct LogisticSolution {
    pub theta: Field,
    pub a: Field,
    pub residual_norm: f64,
    pub newton_iterations: usize,
    /// Principal eigenvalue of `-(Δ + a)`; negative for every accepted solution.
    pub lambda1_of_a: f64,
}

#[derive(Serialize)]
pub struct LogisticSummary {
    pub residual_norm: f64,
    pub newton_iterations: usize,
    pub lambda1_of_a: f64,
}

impl LogisticSolution {
    pub fn summary(&self) -> LogisticSummary {
        LogisticSummary {
            residual_norm: self.residual_norm,
            newton_iterations: self.newton_iterations,
            lambda1_of_a: self.lambda1_of_a,
        }
    }
}

/// Nodewise `Δθ + θ(a - θ)`.
pub fn logistic_residual_field(theta: &Field, a: &Field) -> Result<Field> {
    theta.require_grid(a.grid(), "logistic residual")?;
    let lap = theta.laplacian();
    let values = lap
        .values()
        .iter()
        .zip(theta.values())
        .zip(a.values())
        .map(|((l, t), a)| l + t * (a - t))
        .collect();
    Field::new(*theta.grid(), values)
}

/// `‖Δθ + θ(a - θ)‖₂`.
pub fn logistic_residual(theta: &Field, a: &Field) -> Result<f64> {
    Ok(l2_norm(&logistic_residual_field(theta, a)?))
}

/// `λ₁(a)`, the principal eigenvalue of `-(Δ + diag(a))`, with its eigenfunction.
pub fn principal_of_growth(a: &Field) -> Result<(f64, Field)> {
    let op = assemble_operator(a.grid(), a)?;
    let pair = principal_eigenpair_with(&op, &EigenOptions::with_tol(GUESS_EIGEN_TOL))?;
    Ok((pair.lambda, pair.phi))
}

/// Result of one raw Newton run, positive or not.
#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub theta: Field,
    pub residual: f64,
    pub iterations: usize,
    pub trace: Vec<f64>,
}

/// Damped Newton for `F(θ) = Δθ + θ(a - θ) = 0` from `initial`, with
/// `F'(θ) = Δ + diag(a - 2θ)`. No sign constraint is imposed.
pub fn newton(a: &Field, initial: &Field, opts: &NewtonOptions) -> Result<NewtonOutcome> {
    initial.require_grid(a.grid(), "Newton initial guess")?;
    let grid = *a.grid();
    let n = grid.len();
    let reach = grid.stencil_reach();
    let diag = grid.laplacian_diagonal();

    let mut theta = initial.clone();
    let mut residual_field = logistic_residual_field(&theta, a)?;
    let mut residual = l2_norm(&residual_field);
    let mut trace = vec![residual];

    for iteration in 0..opts.max_iterations {
        if residual <= opts.tol {
            return Ok(NewtonOutcome {
                theta,
                residual,
                iterations: iteration,
                trace,
            });
        }
        let mut entries = Vec::with_capacity(n * (2 * grid.dim() + 1));
        for i in 0..n {
            let w = a.values()[i] - 2.0 * theta.values()[i];
            entries.push((i, i, diag + w));
            grid.for_each_neighbor(i, |j, c| entries.push((i, j, c)));
        }
        let lu = BandedLu::factor(n, reach, reach, entries)?;
        let mut step: Vec<f64> = residual_field.values().iter().map(|r| -r).collect();
        lu.solve_in_place(&mut step);

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial_values = theta.values().iter().zip(&step).map(|(x, d)| x + t * d).collect();
            let trial = Field::new(grid, trial_values)?;
            let trial_res = logistic_residual_field(&trial, a)?;
            let trial_norm = l2_norm(&trial_res);
            if trial_norm < residual {
                accepted = Some((trial, trial_res, trial_norm));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((next, next_res, next_norm)) => {
                theta = next;
                residual_field = next_res;
                residual = next_norm;
                trace.push(residual);
            }
            None => return Err(Error::NewtonDivergence { trace }),
        }
    }
    if residual <= opts.tol {
        return Ok(NewtonOutcome {
            theta,
            residual,
            iterations: opts.max_iterations,
            trace,
        });
    }
    Err(Error::NonConvergence {
        what: "logistic Newton",
        iterations: opts.max_iterations,
        residual,
    })
}

/// Solves the logistic problem for growth field `a` on `grid`.
pub fn solve_logistic(grid: &Grid, a: &Field, tol: f64) -> Result<LogisticSolution> {
    solve_logistic_with(grid, a, &NewtonOptions::with_tol(tol))
}

pub fn solve_logistic_with(grid: &Grid, a: &Field, opts: &NewtonOptions) -> Result<LogisticSolution> {
    a.require_grid(grid, "growth rate")?;
    let (lambda1, phi) = principal_of_growth(a)?;
    if lambda1 >= 0.0 {
        return Err(Error::Subcritical { lambda1 });
    }
    let guess = default_guess(a, &phi);
    match finish_positive(a, &guess, opts, lambda1) {
        // the half-amplitude guess can sit below the basin of the positive
        // branch for strongly supercritical a; continuation does not
        Err(Error::NotPositive(_) | Error::NewtonDivergence { .. } | Error::NonConvergence { .. }) => {
            continuation(grid, a, FALLBACK_CONTINUATION_STEPS, opts)
        }
        other => other,
    }
}

const FALLBACK_CONTINUATION_STEPS: usize = 8;

/// Newton from a caller-supplied guess, still gated on supercriticality.
pub fn solve_logistic_from(a: &Field, initial: &Field, opts: &NewtonOptions) -> Result<LogisticSolution> {
    let (lambda1, _) = principal_of_growth(a)?;
    if lambda1 >= 0.0 {
        return Err(Error::Subcritical { lambda1 });
    }
    finish_positive(a, initial, opts, lambda1)
}

/// `t·φ₁` scaled so that its maximum is `max(a)/2`.
fn default_guess(a: &Field, phi: &Field) -> Field {
    let target = 0.5 * a.max();
    phi.scaled(target / phi.max())
}

fn finish_positive(a: &Field, guess: &Field, opts: &NewtonOptions, lambda1: f64) -> Result<LogisticSolution> {
    let out = newton(a, guess, opts)?;
    let min = out.theta.min();
    if !is_nontrivial_positive(&out.theta) {
        return Err(Error::NotPositive(format!(
            "Newton converged to a non-positive or trivial solution (min {min:.3e}, max {:.3e})",
            out.theta.max()
        )));
    }
    Ok(LogisticSolution {
        theta: out.theta,
        a: a.clone(),
        residual_norm: out.residual,
        newton_iterations: out.iterations,
        lambda1_of_a: lambda1,
    })
}

/// Natural-parameter continuation: solves along `a + c_j` with `c_j` rising
/// from `0.9·λ₁(a)` (just supercritical) to 0. Each step is predicted with the
/// tangent `dθ/dc = (-F'(θ))⁻¹ θ` and corrected by Newton.
pub fn continuation(grid: &Grid, a: &Field, steps: usize, opts: &NewtonOptions) -> Result<LogisticSolution> {
    a.require_grid(grid, "growth rate")?;
    let (lambda1, phi) = principal_of_growth(a)?;
    if lambda1 >= 0.0 {
        return Err(Error::Subcritical { lambda1 });
    }
    let steps = steps.max(1);
    let offset0 = 0.9 * lambda1;

    // Bifurcation amplitude estimate θ ≈ ε φ₁ with ε = |λ₁|·Σφ²/Σφ³.
    let onset = -(lambda1 - offset0);
    let (s2, s3) = phi
        .values()
        .iter()
        .fold((0.0, 0.0), |(s2, s3), p| (s2 + p * p, s3 + p * p * p));
    let mut guess = phi.scaled(onset * s2 / s3);
    let mut prev_offset = offset0;
    let mut last = None;
    for j in 0..=steps {
        let offset = offset0 * (1.0 - j as f64 / steps as f64);
        if let Some(prev) = &last {
            guess = predict(prev, offset - prev_offset)?;
        }
        let a_j = a.map(|v| v + offset);
        let sol = finish_positive(&a_j, &guess, opts, lambda1 - offset)?;
        prev_offset = offset;
        last = Some(sol);
    }
    let mut sol = last.expect("at least one continuation step");
    sol.a = a.clone();
    Ok(sol)
}

/// Euler predictor `θ + Δc · (-F'(θ))⁻¹ θ`.
fn predict(sol: &LogisticSolution, delta: f64) -> Result<Field> {
    let grid = *sol.theta.grid();
    let n = grid.len();
    let reach = grid.stencil_reach();
    let diag = grid.laplacian_diagonal();
    let mut entries = Vec::with_capacity(n * (2 * grid.dim() + 1));
    for i in 0..n {
        let w = sol.a.values()[i] - 2.0 * sol.theta.values()[i];
        entries.push((i, i, -(diag + w)));
        grid.for_each_neighbor(i, |j, c| entries.push((i, j, -c)));
    }
    let lu = BandedLu::factor(n, reach, reach, entries)?;
    let tangent = lu.solve(sol.theta.values());
    let values = sol
        .theta
        .values()
        .iter()
        .zip(&tangent)
        .map(|(t, d)| t + delta * d)
        .collect();
    Field::new(grid, values)
}

/// Outcome of one start of the multi-start probe.
#[derive(Clone, Debug, Serialize)]
pub struct ProbeStart {
    pub label: String,
    pub converged: bool,
    pub positive: bool,
    pub iterations: usize,
    pub residual: f64,
    /// Index into [`UniquenessReport::distinct`] when the start produced a
    /// positive solution.
    pub solution: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct UniquenessReport {
    pub starts: Vec<ProbeStart>,
    /// Representatives of the distinct positive solutions found.
    pub distinct: Vec<Field>,
    /// Nodewise max-difference used to merge solutions.
    pub threshold: f64,
}

impl UniquenessReport {
    pub fn distinct_positive(&self) -> usize {
        self.distinct.len()
    }

    pub fn non_convergent(&self) -> usize {
        self.starts.iter().filter(|s| !s.converged).count()
    }
}

/// Nodewise max-difference under which two solutions count as the same;
/// fields whose maximum is below it count as the trivial solution.
pub const DISTINCT_THRESHOLD: f64 = 1e-6;

fn is_nontrivial_positive(theta: &Field) -> bool {
    theta.min() > 0.0 && theta.max() > DISTINCT_THRESHOLD
}

/// Runs Newton from `n_starts` positive initial fields and counts distinct
/// positive limits. Starts cycle through constants in `(0, max a]`, scaled
/// principal eigenfunctions, and seeded random positive fields.
pub fn uniqueness_probe(grid: &Grid, a: &Field, n_starts: usize, tol: f64, seed: u64) -> Result<UniquenessReport> {
    a.require_grid(grid, "growth rate")?;
    let amax = a.max().abs().max(1e-3);
    let phi = principal_of_growth(a).map(|(_, p)| p).ok();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let opts = NewtonOptions::with_tol(tol);

    let mut starts = Vec::with_capacity(n_starts);
    let mut distinct: Vec<Field> = Vec::new();
    let per_kind = n_starts.div_ceil(3).max(1);
    for s in 0..n_starts {
        let kind = s % 3;
        let level = (s / 3 + 1) as f64 / per_kind as f64;
        let (label, init) = match (kind, &phi) {
            (0, _) | (1, None) => (
                format!("constant {:.4}", level * amax),
                Field::constant(grid, level * amax),
            ),
            (1, Some(p)) => (
                format!("eigenfunction x{:.4}", level * amax),
                p.scaled(level * amax / p.max()),
            ),
            _ => {
                let values = (0..grid.len()).map(|_| amax * rng.random_range(0.01..=1.0)).collect();
                (format!("random #{s}"), Field::new(*grid, values)?)
            }
        };
        let outcome = newton(a, &init, &opts);
        let start = match outcome {
            Ok(out) => {
                let positive = is_nontrivial_positive(&out.theta);
                let mut solution = None;
                if positive {
                    let found = distinct
                        .iter()
                        .position(|d| d.max_abs_diff(&out.theta).is_ok_and(|m| m <= DISTINCT_THRESHOLD));
                    solution = Some(found.unwrap_or_else(|| {
                        distinct.push(out.theta.clone());
                        distinct.len() - 1
                    }));
                }
                ProbeStart {
                    label,
                    converged: true,
                    positive,
                    iterations: out.iterations,
                    residual: out.residual,
                    solution,
                }
            }
            Err(e) => ProbeStart {
                label,
                converged: false,
                positive: false,
                iterations: match &e {
                    Error::NewtonDivergence { trace } => trace.len(),
                    Error::NonConvergence { iterations, .. } => *iterations,
                    _ => 0,
                },
                residual: match &e {
                    Error::NewtonDivergence { trace } => *trace.last().unwrap_or(&f64::NAN),
                    Error::NonConvergence { residual, .. } => *residual,
                    _ => f64::NAN,
                },
                solution: None,
            },
        };
        starts.push(start);
    }
    Ok(UniquenessReport {
        starts,
        distinct,
        threshold: DISTINCT_THRESHOLD,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::principal_eigenpair;
    use std::f64::consts::PI;

    fn solve_const(n: usize, a: f64) -> LogisticSolution {
        let g = Grid::interval(PI, n).unwrap();
        solve_logistic(&g, &Field::constant(&g, a), 1e-10).unwrap()
    }

    #[test]
    fn subcritical_growth_is_rejected() {
        let g = Grid::interval(PI, 100).unwrap();
        let err = solve_logistic(&g, &Field::constant(&g, 0.5), 1e-10).unwrap_err();
        match err {
            Error::Subcritical { lambda1 } => assert!((lambda1 - 0.5).abs() < 1e-3),
            other => panic!("expected subcritical, got {other:?}"),
        }
    }

    #[test]
    fn solution_is_positive_bounded_and_converged() {
        let sol = solve_const(200, 2.0);
        assert!(sol.theta.min() > 0.0);
        assert!(sol.theta.max() < 2.0);
        assert!(sol.residual_norm <= 1e-10);
        assert!(sol.lambda1_of_a < 0.0);
        let r = logistic_residual(&sol.theta, &sol.a).unwrap();
        assert_eq!(r, sol.residual_norm);
    }

    #[test]
    fn zero_has_zero_residual_and_constant_does_not() {
        let g = Grid::interval(PI, 50).unwrap();
        let a = Field::constant(&g, 2.0);
        assert_eq!(logistic_residual(&Field::zeros(&g), &a).unwrap(), 0.0);
        // θ ≡ a kills the reaction term, leaving the boundary-layer Laplacian:
        // only the two end nodes see Δθ = -a/h².
        let h = PI / 51.0;
        let expected = (2.0 * (2.0 / (h * h)).powi(2) * h).sqrt();
        let r = logistic_residual(&a, &a).unwrap();
        assert!((r - expected).abs() <= 1e-12 * expected, "{r} vs {expected}");
    }

    #[test]
    fn residual_rejects_grid_mismatch() {
        let g1 = Grid::interval(PI, 50).unwrap();
        let g2 = Grid::interval(PI, 51).unwrap();
        assert!(matches!(
            logistic_residual(&Field::zeros(&g1), &Field::zeros(&g2)),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn theta_increases_with_growth_rate() {
        let low = solve_const(120, 1.8);
        let high = solve_const(120, 2.6);
        for (l, h) in low.theta.values().iter().zip(high.theta.values()) {
            assert!(l <= h);
        }
    }

    #[test]
    fn theta_is_a_null_weight_and_twice_theta_is_stable() {
        // λ₁(a - 2θ) > 0 and λ₁(a - θ) = 0
        let sol = solve_const(200, 2.0);
        let g = *sol.theta.grid();
        let w2 = sol.a.zip_with(&sol.theta, |a, t| a - 2.0 * t).unwrap();
        let w1 = sol.a.zip_with(&sol.theta, |a, t| a - t).unwrap();
        let l2 = principal_eigenpair(&assemble_operator(&g, &w2).unwrap(), 1e-10).unwrap();
        let l1 = principal_eigenpair(&assemble_operator(&g, &w1).unwrap(), 1e-10).unwrap();
        assert!(l2.lambda > 0.0);
        assert!(l1.lambda.abs() <= 1e-8, "{}", l1.lambda);
    }

    #[test]
    fn near_onset_amplitude_halves_with_distance() {
        let g = Grid::interval(PI, 200).unwrap();
        let lambda1 = crate::spectral::interval_laplacian_eigenvalue(PI, 200, 1);
        let maxima: Vec<f64> = [0.05, 0.025, 0.0125]
            .iter()
            .map(|eps| {
                let a = Field::constant(&g, lambda1 + eps);
                solve_logistic(&g, &a, 1e-12).unwrap().theta.max()
            })
            .collect();
        assert!(maxima[0] <= 0.2);
        for w in maxima.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 2.0).abs() < 0.1, "ratio {ratio}");
        }
    }

    #[test]
    fn continuation_reaches_the_same_solution() {
        let g = Grid::interval(PI, 150).unwrap();
        let a = Field::constant(&g, 6.0);
        let direct = solve_logistic(&g, &a, 1e-10).unwrap();
        let cont = continuation(&g, &a, 5, &NewtonOptions::with_tol(1e-10)).unwrap();
        assert!(direct.theta.max_abs_diff(&cont.theta).unwrap() < 1e-9);
    }

    #[test]
    fn probe_finds_nothing_when_subcritical() {
        let g = Grid::interval(PI, 60).unwrap();
        let a = Field::constant(&g, 0.5);
        let report = uniqueness_probe(&g, &a, 9, 1e-10, 0).unwrap();
        assert_eq!(report.distinct_positive(), 0);
        assert_eq!(report.starts.len(), 9);
    }

    #[test]
    fn spatially_varying_growth() {
        let g = Grid::interval(PI, 200).unwrap();
        let a = Field::from_fn(&g, |p| 1.5 + 0.5 * p[0].sin());
        let sol = solve_logistic(&g, &a, 1e-10).unwrap();
        assert!(sol.residual_norm <= 1e-10);
        assert!(sol.theta.min() > 0.0 && sol.theta.max() < a.max());
    }
}
