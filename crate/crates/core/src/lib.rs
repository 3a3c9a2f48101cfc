//! Synchronized steady states of the diffusive Lotka-Volterra predator-prey
//! system with Dirichlet boundaries, and their linear stability.
//!
//! The system on a box domain with zero boundary data is
//!
//! ```text
//! u_t = Δu + u (a - u - b v)
//! v_t = Δv + v (a - v + c u)
//! ```
//!
//! with `0 < b < 1`, `c > 0` and a growth rate `a` (constant or a field).
//! Whenever `a` is supercritical the system has the synchronized equilibrium
//! `(u, v) = (α θ, β θ)` where `θ` is the positive logistic steady state and
//! `α = (1-b)/(1+bc)`, `β = (1+c)/(1+bc)`.
//!
//! The crate is organized bottom-up:
//!
//! * [`grid`]: box domains, discrete fields, norms and the Dirichlet Laplacian.
//! * [`spectral`]: ordered eigenpairs of `-(Δ + m)`.
//! * [`elliptic`]: Newton solver for the logistic problem `Δθ + θ(a-θ) = 0`.
//! * [`model`]: parameters, the synchronized state and system residuals.
//! * [`linstab`]: the coupled linearization, its spectrum, and the reduction of
//!   that spectrum to two scalar weighted problems.
//! * [`dynamics`]: IMEX time stepping and decay-rate fits.
//! * [`cli`]: the `lvsync` command-line front end.
//!
//! Runnable walkthroughs of each capability live in `examples/`.

pub mod cli;
pub mod dynamics;
pub mod elliptic;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod linstab;
pub mod model;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{Domain, Field, Grid, WeightedOperator};
pub use model::{ModelParams, SteadyState};
