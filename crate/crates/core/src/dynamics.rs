//! Time integration of the parabolic predator-prey system
//!
//! ```text
//! u_t = Δu + u(a - u - bv),   v_t = Δv + v(a - v + cu)
//! ```
//!
//! with homogeneous Dirichlet data, and decay-rate measurements toward a
//! steady state.
//!
//! The scheme is first-order IMEX: diffusion implicit, reaction explicit,
//!
//! ```text
//! (I - dt Δ) u⁺ = u + dt · u(a - u - bv)
//! ```
//!
//! and likewise for `v`. The matrix `I - dt Δ` is the same for both species and
//! every step, so it is factored once. It is an M-matrix, so its inverse is
//! nonnegative and positivity reduces to the explicit reaction update staying
//! nonnegative. [`max_admissible_dt`] gives the step bound checked at every
//! step.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{assemble_operator, fmt_sci, Field};
use crate::linstab::{assemble_jacobian, coupled_spectrum};
use crate::model::{ModelParams, SteadyState};

/// Admissibility constant: `dt · max(|a| + 2 max(u, v)(1 + b + c)) ≤ 0.5`.
pub const ADMISSIBLE_PRODUCT: f64 = 0.5;
/// Distances below this are treated as rounding noise by [`decay_rate`].
pub const NORM_FLOOR: f64 = 1e-10;
/// Leading fraction of samples discarded as transient by [`decay_rate`].
pub const TRANSIENT_FRACTION: f64 = 0.2;
/// Fewest samples a decay fit accepts.
pub const MIN_FIT_SAMPLES: usize = 5;
pub const SCHEME: &str = "imex-euler";

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<(Field, Field)>,
    pub params: ModelParams,
    pub dt: f64,
    pub steps: usize,
    pub method: &'static str,
}

/// `dt · max_i(|a_i| + 2 max(u_i, v_i)(1 + b + c))`.
pub fn step_product(u: &Field, v: &Field, params: &ModelParams, dt: f64) -> f64 {
    product_of(u.values(), v.values(), params, dt)
}

fn product_of(u: &[f64], v: &[f64], params: &ModelParams, dt: f64) -> f64 {
    let k = 1.0 + params.b + params.c;
    let a = params.a.values();
    let worst = (0..a.len())
        .map(|i| a[i].abs() + 2.0 * u[i].max(v[i]) * k)
        .fold(0.0, f64::max);
    dt * worst
}

/// Largest step allowed by the admissibility rule at `(u, v)`.
pub fn max_admissible_dt(u: &Field, v: &Field, params: &ModelParams) -> f64 {
    ADMISSIBLE_PRODUCT / step_product(u, v, params, 1.0)
}

fn check_nonnegative(f: &Field) -> Result<()> {
    match f.values().iter().position(|x| x.is_nan() || *x < 0.0) {
        Some(node) => Err(Error::NegativeInitialData {
            node,
            value: f.values()[node],
        }),
        None => Ok(()),
    }
}

/// Integrates from `(u0, v0)` up to the first step at or beyond `t_end`,
/// storing every `store_every`-th state plus the initial and final ones.
pub fn evolve(
    u0: &Field,
    v0: &Field,
    params: &ModelParams,
    dt: f64,
    t_end: f64,
    store_every: usize,
) -> Result<Trajectory> {
    let grid = *params.a.grid();
    u0.require_grid(&grid, "initial prey")?;
    v0.require_grid(&grid, "initial predator")?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt = {dt} must be positive")));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!("t_end = {t_end} must be positive")));
    }
    if store_every == 0 {
        return Err(Error::InvalidParameter("store_every must be at least 1".into()));
    }
    check_nonnegative(u0)?;
    check_nonnegative(v0)?;

    let steps = (t_end / dt - 1e-9).ceil().max(1.0) as usize;
    let lu = assemble_operator(&grid, &Field::zeros(&grid))?.factor_negated_shift(-1.0 / dt)?;
    let (b, c) = (params.b, params.c);
    let a = params.a.values();
    let n = grid.len();

    let mut u = u0.values().to_vec();
    let mut v = v0.values().to_vec();
    let mut times = vec![0.0];
    let mut states = vec![(u0.clone(), v0.clone())];
    for step in 1..=steps {
        let product = product_of(&u, &v, params, dt);
        if product > ADMISSIBLE_PRODUCT {
            return Err(Error::InadmissibleStep {
                dt,
                time: (step - 1) as f64 * dt,
                product,
            });
        }
        // (−Δ + 1/dt) x = rhs/dt
        let mut ru: Vec<f64> = (0..n)
            .map(|i| (u[i] + dt * u[i] * (a[i] - u[i] - b * v[i])) / dt)
            .collect();
        let mut rv: Vec<f64> = (0..n)
            .map(|i| (v[i] + dt * v[i] * (a[i] - v[i] + c * u[i])) / dt)
            .collect();
        lu.solve_in_place(&mut ru);
        lu.solve_in_place(&mut rv);
        u = ru;
        v = rv;
        let time = step as f64 * dt;
        for vals in [&u, &v] {
            if let Some(node) = vals.iter().position(|x| x.is_nan() || *x < 0.0) {
                return Err(Error::PositivityLoss {
                    time,
                    node,
                    value: vals[node],
                });
            }
        }
        if step % store_every == 0 || step == steps {
            times.push(time);
            states.push((Field::new(grid, u.clone())?, Field::new(grid, v.clone())?));
        }
    }
    Ok(Trajectory {
        times,
        states,
        params: params.clone(),
        dt,
        steps,
        method: SCHEME,
    })
}

/// Distances of one stored sample from the reference state.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Distance {
    pub t: f64,
    pub u: f64,
    pub v: f64,
    /// `√(‖u−u*‖² + ‖v−v*‖²)`.
    pub total: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &(Field, Field) {
        self.states.last().expect("trajectory always stores the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("nonempty")
    }

    /// Discrete L2 distances of every stored sample from `(u*, v*)`.
    pub fn distances(&self, u_ref: &Field, v_ref: &Field) -> Result<Vec<Distance>> {
        self.times
            .iter()
            .zip(&self.states)
            .map(|(&t, (u, v))| {
                let du = u.zip_with(u_ref, |x, y| x - y)?.l2_norm();
                let dv = v.zip_with(v_ref, |x, y| x - y)?.l2_norm();
                Ok(Distance {
                    t,
                    u: du,
                    v: dv,
                    total: du.hypot(dv),
                })
            })
            .collect()
    }

    /// CSV `t,norm_u_dist,norm_v_dist,total_dist`.
    pub fn distance_csv(&self, u_ref: &Field, v_ref: &Field) -> Result<String> {
        let mut s = String::from("t,norm_u_dist,norm_v_dist,total_dist\n");
        for d in self.distances(u_ref, v_ref)? {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                fmt_sci(d.t),
                fmt_sci(d.u),
                fmt_sci(d.v),
                fmt_sci(d.total)
            );
        }
        Ok(s)
    }

    /// Index of the stored sample closest in time to `t`.
    pub fn sample_near(&self, t: f64) -> usize {
        (0..self.times.len())
            .min_by(|&i, &j| (self.times[i] - t).abs().total_cmp(&(self.times[j] - t).abs()))
            .unwrap_or(0)
    }

    /// Writes `u_<i>.csv` and `v_<i>.csv` for the samples nearest each
    /// requested time. Returns the sample indices written.
    pub fn write_snapshots(&self, dir: impl AsRef<Path>, at: &[f64]) -> Result<Vec<usize>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        for &t in at {
            let i = self.sample_near(t);
            if written.contains(&i) {
                continue;
            }
            let (u, v) = &self.states[i];
            u.write_csv(dir.join(format!("u_{i}.csv")))?;
            v.write_csv(dir.join(format!("v_{i}.csv")))?;
            written.push(i);
        }
        Ok(written)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayFit {
    /// Slope of `log ‖(u,v) − (u*,v*)‖` in time; negative for decay.
    pub rate: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub samples_used: usize,
    /// Whether the distance is nonincreasing over the window.
    pub monotone: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    /// Leading fraction of samples to discard.
    pub skip_fraction: f64,
    pub floor: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            skip_fraction: TRANSIENT_FRACTION,
            floor: NORM_FLOOR,
        }
    }
}

/// Least-squares decay rate toward `reference`, skipping the initial
/// transient and samples under the rounding floor.
pub fn decay_rate(traj: &Trajectory, reference: &SteadyState) -> Result<DecayFit> {
    decay_rate_with(traj, &reference.u, &reference.v, &FitOptions::default())
}

pub fn decay_rate_with(traj: &Trajectory, u_ref: &Field, v_ref: &Field, opts: &FitOptions) -> Result<DecayFit> {
    let dist = traj.distances(u_ref, v_ref)?;
    let skip = (opts.skip_fraction * dist.len() as f64).floor() as usize;
    let pts: Vec<(f64, f64)> = dist[skip.min(dist.len())..]
        .iter()
        .filter(|d| d.total >= opts.floor)
        .map(|d| (d.t, d.total.ln()))
        .collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientSamples(pts.len()));
    }
    let m = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let stt: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - ym).powi(2)).sum();
    let rate = sty / stt;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - (ym + rate * (p.0 - tm))).powi(2)).sum();
    // a flat series has no trend to explain
    let flat = syy <= m * (f64::EPSILON * ym.abs().max(1.0)).powi(2) * 16.0;
    let r_squared = if flat {
        0.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    let monotone = pts.windows(2).all(|w| w[1].1 <= w[0].1);
    Ok(DecayFit {
        rate,
        r_squared,
        window: (pts[0].0, pts[pts.len() - 1].0),
        samples_used: pts.len(),
        monotone,
    })
}

/// `state + amplitude · (φ, ψ)/max|(φ, ψ)|` for the principal eigenvector of
/// the linearization at `state`. Returns the perturbed pair and `μ₁`.
pub fn principal_perturbation(
    state: &SteadyState,
    params: &ModelParams,
    amplitude: f64,
) -> Result<(Field, Field, f64)> {
    let grid = *params.a.grid();
    let jac = assemble_jacobian(&state.u, &state.v, params, &grid)?;
    let spec = coupled_spectrum(&jac, 1, 1e-10)?;
    let mode = &spec.modes[0];
    let (phi, psi) = mode
        .vector
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("principal eigenvalue of the linearization is not real".into()))?;
    let peak = phi
        .values()
        .iter()
        .chain(psi.values())
        .fold(0.0f64, |m, x| m.max(x.abs()));
    let s = amplitude / peak;
    Ok((
        state.u.zip_with(phi, |x, p| (x + s * p).max(0.0))?,
        state.v.zip_with(psi, |x, p| (x + s * p).max(0.0))?,
        mode.mu.re,
    ))
}

/// `state + amplitude · r` with `r` uniform in `[-1, 1]` per node and
/// species, clipped at zero.
pub fn random_perturbation(state: &SteadyState, amplitude: f64, seed: u64) -> (Field, Field) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jitter = |f: &Field| {
        let vals = f
            .values()
            .iter()
            .map(|x| (x + amplitude * (2.0 * rng.random::<f64>() - 1.0)).max(0.0))
            .collect();
        Field::new(*f.grid(), vals).expect("same grid")
    };
    let u = jitter(&state.u);
    let v = jitter(&state.v);
    (u, v)
}
