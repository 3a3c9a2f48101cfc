//! Model parameters, the synchronized steady state and system residuals.

use serde::Serialize;

use crate::elliptic::LogisticSolution;
use crate::error::{Error, Result};
use crate::grid::{l2_norm, Field};

/// Growth rate `a` (a field, possibly constant), predation rate `b ∈ (0,1)`
/// and conversion rate `c > 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub a: Field,
    pub b: f64,
    pub c: f64,
}

impl ModelParams {
    pub fn new(a: Field, b: f64, c: f64) -> Result<Self> {
        validate_rates(b, c)?;
        Ok(ModelParams { a, b, c })
    }
}

pub(crate) fn validate_rates(b: f64, c: f64) -> Result<()> {
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "b = {b} must lie in the open interval (0, 1)"
        )));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!("c = {c} must be positive")));
    }
    Ok(())
}

/// `(α, β) = ((1-b)/(1+bc), (1+c)/(1+bc))`.
pub fn ratio_coefficients(b: f64, c: f64) -> Result<(f64, f64)> {
    validate_rates(b, c)?;
    let d = 1.0 + b * c;
    Ok(((1.0 - b) / d, (1.0 + c) / d))
}

#[derive(Clone, Debug)]
pub struct SteadyState {
    pub u: Field,
    pub v: Field,
    pub alpha: f64,
    pub beta: f64,
    pub theta: Field,
}

#[derive(Serialize)]
pub struct SteadySummary {
    pub alpha: f64,
    pub beta: f64,
    pub residual_u: f64,
    pub residual_v: f64,
    pub logistic_residual: f64,
}

/// `(u, v) = (α θ, β θ)`, a positive steady state whenever `θ` is the
/// positive logistic solution for `params.a`.
pub fn synchronized_state(params: &ModelParams, theta: &LogisticSolution) -> Result<SteadyState> {
    let (alpha, beta) = ratio_coefficients(params.b, params.c)?;
    theta.theta.require_grid(params.a.grid(), "synchronized state")?;
    if theta.a != params.a {
        return Err(Error::InvalidParameter(
            "logistic solution was computed for a different growth rate".into(),
        ));
    }
    if theta.theta.min() <= 0.0 {
        return Err(Error::NotPositive(
            "synchronized state requires a strictly positive θ".into(),
        ));
    }
    Ok(SteadyState {
        u: theta.theta.scaled(alpha),
        v: theta.theta.scaled(beta),
        alpha,
        beta,
        theta: theta.theta.clone(),
    })
}

/// Prey-only state `(θ, 0)`.
pub fn prey_only_state(theta: &LogisticSolution) -> (Field, Field) {
    (theta.theta.clone(), Field::zeros(theta.theta.grid()))
}

/// Predator-only state `(0, θ)`.
pub fn predator_only_state(theta: &LogisticSolution) -> (Field, Field) {
    (Field::zeros(theta.theta.grid()), theta.theta.clone())
}

/// Nodewise residuals `(Δu + u(a - u - bv), Δv + v(a - v + cu))`.
pub fn system_residual_fields(u: &Field, v: &Field, params: &ModelParams) -> Result<(Field, Field)> {
    u.require_grid(params.a.grid(), "prey field")?;
    v.require_grid(params.a.grid(), "predator field")?;
    let (b, c) = (params.b, params.c);
    let lu = u.laplacian();
    let lv = v.laplacian();
    let a = params.a.values();
    let (uu, vv) = (u.values(), v.values());
    let ru = (0..uu.len())
        .map(|i| lu.values()[i] + uu[i] * (a[i] - uu[i] - b * vv[i]))
        .collect();
    let rv = (0..vv.len())
        .map(|i| lv.values()[i] + vv[i] * (a[i] - vv[i] + c * uu[i]))
        .collect();
    Ok((Field::new(*u.grid(), ru)?, Field::new(*u.grid(), rv)?))
}

/// Discrete L2 norms of the two steady-state residuals.
pub fn system_residual(u: &Field, v: &Field, params: &ModelParams) -> Result<(f64, f64)> {
    let (ru, rv) = system_residual_fields(u, v, params)?;
    Ok((l2_norm(&ru), l2_norm(&rv)))
}

impl SteadyState {
    pub fn summary(&self, params: &ModelParams, logistic_residual: f64) -> Result<SteadySummary> {
        let (residual_u, residual_v) = system_residual(&self.u, &self.v, params)?;
        Ok(SteadySummary {
            alpha: self.alpha,
            beta: self.beta,
            residual_u,
            residual_v,
            logistic_residual,
        })
    }
}
