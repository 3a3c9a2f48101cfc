//! Linearization of the predator-prey system and its spectrum.
//!
//! At a state `(u, v)` the linearized operator acting on perturbations
//! `(φ, ψ)` is
//!
//! ```text
//! J = [ Δ + (a - 2u - bv)      -b u           ]
//!     [ c v                    Δ + (a - 2v + cu) ]
//! ```
//!
//! and the state is linearly stable when every eigenvalue `μ` of `-J` has
//! positive real part.
//!
//! At the synchronized state `(αθ, βθ)` the spectrum of `-J` reduces to two
//! scalar weighted problems. If `(λ, ϕ)` is an eigenpair of `-(Δ + a - sθ)`,
//! then
//!
//! * `(b ϕ, c ϕ)` is an eigenvector of `-J` with eigenvalue `λ` when
//!   `s = s₁ = (2 + c - b)/(1 + bc)`, and
//! * `((1-b) ϕ, (1+c) ϕ)` is an eigenvector with eigenvalue `λ` when `s = 2`.
//!
//! Both identities are exact in the discrete setting, because the two diagonal
//! blocks differ from `Δ + a - sθ` by multiples of `θ` and the off-diagonal
//! blocks are multiples of `θ`. The ratios `b/c` and `(1-b)/(1+c)` are the two
//! roots of `c(1+c)z² - (b+c)z + b(1-b) = 0`. Since both `s₁` and `2` exceed 1,
//! every eigenvalue is positive. On the locus `b = c/(2c+1)` the roots
//! coincide, `s₁ = 2`, and the pairs become Jordan blocks; the map
//! `ξ = (2c+1)φ - ψ` then intertwines `J` with `Δ + a - 2θ`.

use std::fmt::Write as _;

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::elliptic::{solve_logistic, LogisticSolution};
use crate::error::{Error, Result};
use crate::grid::{assemble_operator, fmt_sci, Field, Grid};
use crate::linalg::{dot, norm2, orthonormalize, BandedLu, CsrMatrix};
use crate::model::{synchronized_state, validate_rates, ModelParams};
use crate::spectral::{eigenpairs, Spectrum};

pub type C64 = Complex<f64>;

/// `|b - c/(2c+1)|` at or below this counts as the degenerate locus.
pub const DEGENERATE_TOL: f64 = 1e-12;
/// `|b - c/(2c+1)|` below this is flagged as ill-conditioned.
pub const DEGENERATE_BAND: f64 = 1e-4;
/// Mismatch threshold applied on or near the degenerate locus.
pub const DEGENERATE_MISMATCH_TOL: f64 = 1e-6;
/// Predicted eigenvalues closer than this (relative) are compared as a cluster.
pub const CLUSTER_GAP: f64 = 1e-6;
/// Dense oracle cutoff for the coupled problem (total unknowns).
pub const COUPLED_DENSE_LIMIT: usize = 1000;

/// The linearized operator at `(u, v)`, stored blockwise over interior nodes.
#[derive(Clone, Debug)]
pub struct CoupledJacobian {
    grid: Grid,
    pub u: Field,
    pub v: Field,
    pub params: ModelParams,
    prey_weight: Field,
    predator_weight: Field,
    prey_coupling: Field,
    predator_coupling: Field,
}

pub fn assemble_jacobian(u: &Field, v: &Field, params: &ModelParams, grid: &Grid) -> Result<CoupledJacobian> {
    u.require_grid(grid, "prey field")?;
    v.require_grid(grid, "predator field")?;
    params.a.require_grid(grid, "growth rate")?;
    let (b, c) = (params.b, params.c);
    let n = grid.len();
    let (a, uu, vv) = (params.a.values(), u.values(), v.values());
    let prey_weight = (0..n).map(|i| a[i] - 2.0 * uu[i] - b * vv[i]).collect();
    let predator_weight = (0..n).map(|i| a[i] - 2.0 * vv[i] + c * uu[i]).collect();
    let prey_coupling = uu.iter().map(|x| -b * x).collect();
    let predator_coupling = vv.iter().map(|x| c * x).collect();
    Ok(CoupledJacobian {
        grid: *grid,
        u: u.clone(),
        v: v.clone(),
        params: params.clone(),
        prey_weight: Field::new(*grid, prey_weight)?,
        predator_weight: Field::new(*grid, predator_weight)?,
        prey_coupling: Field::new(*grid, prey_coupling)?,
        predator_coupling: Field::new(*grid, predator_coupling)?,
    })
}

impl CoupledJacobian {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Total unknowns, twice the node count.
    pub fn dim(&self) -> usize {
        2 * self.grid.len()
    }

    /// Weight of the prey diagonal block, `a - 2u - bv`.
    pub fn prey_weight(&self) -> &Field {
        &self.prey_weight
    }

    /// Weight of the predator diagonal block, `a - 2v + cu`.
    pub fn predator_weight(&self) -> &Field {
        &self.predator_weight
    }

    /// Diagonal of the upper off-diagonal block, `-b u`.
    pub fn prey_coupling(&self) -> &Field {
        &self.prey_coupling
    }

    /// Diagonal of the lower off-diagonal block, `c v`.
    pub fn predator_coupling(&self) -> &Field {
        &self.predator_coupling
    }

    /// `J x` for `x = [φ; ψ]` in block order.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        assert_eq!(x.len(), 2 * n);
        let (phi, psi) = x.split_at(n);
        let mut out = vec![0.0; 2 * n];
        {
            let (top, bottom) = out.split_at_mut(n);
            self.grid.apply_laplacian(phi, top);
            self.grid.apply_laplacian(psi, bottom);
        }
        for i in 0..n {
            out[i] += self.prey_weight.values()[i] * phi[i] + self.prey_coupling.values()[i] * psi[i];
            out[n + i] += self.predator_coupling.values()[i] * phi[i] + self.predator_weight.values()[i] * psi[i];
        }
        out
    }

    /// Assembled sparse matrix in block order `[φ; ψ]`.
    pub fn matrix(&self) -> CsrMatrix {
        let n = self.grid.len();
        let diag = self.grid.laplacian_diagonal();
        let mut t = Vec::with_capacity(2 * n * (2 * self.grid.dim() + 2));
        for i in 0..n {
            t.push((i, i, diag + self.prey_weight.values()[i]));
            t.push((i, n + i, self.prey_coupling.values()[i]));
            t.push((n + i, i, self.predator_coupling.values()[i]));
            t.push((n + i, n + i, diag + self.predator_weight.values()[i]));
            self.grid.for_each_neighbor(i, |j, w| {
                t.push((i, j, w));
                t.push((n + i, n + j, w));
            });
        }
        CsrMatrix::from_triplets(2 * n, 2 * n, &t)
    }

    /// Gershgorin lower bound on the real parts of the spectrum of `-J`.
    pub fn real_part_lower_bound(&self) -> f64 {
        let m = self.matrix();
        (0..m.nrows())
            .map(|r| {
                let mut center = 0.0;
                let mut radius = 0.0;
                for (c, v) in m.row(r) {
                    if c == r {
                        center = -v;
                    } else {
                        radius += v.abs();
                    }
                }
                center - radius
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Factors `-J - shift·I` with nodes interleaved as `(φ_i, ψ_i)` so the
    /// matrix is banded.
    fn factor_negated_shift(&self, shift: f64) -> Result<InterleavedLu> {
        let n = self.grid.len();
        let reach = 2 * self.grid.stencil_reach();
        let diag = self.grid.laplacian_diagonal();
        let mut e = Vec::with_capacity(2 * n * (2 * self.grid.dim() + 2));
        for i in 0..n {
            let (p, q) = (2 * i, 2 * i + 1);
            e.push((p, p, -(diag + self.prey_weight.values()[i]) - shift));
            e.push((p, q, -self.prey_coupling.values()[i]));
            e.push((q, p, -self.predator_coupling.values()[i]));
            e.push((q, q, -(diag + self.predator_weight.values()[i]) - shift));
            self.grid.for_each_neighbor(i, |j, w| {
                e.push((p, 2 * j, -w));
                e.push((q, 2 * j + 1, -w));
            });
        }
        Ok(InterleavedLu {
            n,
            lu: BandedLu::factor(2 * n, reach, reach, e)?,
        })
    }
}

struct InterleavedLu {
    n: usize,
    lu: BandedLu,
}

impl InterleavedLu {
    /// Solves in block order.
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut w = vec![0.0; 2 * n];
        for i in 0..n {
            w[2 * i] = b[i];
            w[2 * i + 1] = b[n + i];
        }
        self.lu.solve_in_place(&mut w);
        let mut out = vec![0.0; 2 * n];
        for i in 0..n {
            out[i] = w[2 * i];
            out[n + i] = w[2 * i + 1];
        }
        out
    }
}

/// `s₁ = (2 + c - b)/(1 + bc)`, the weight multiplier of the `(b, c)` branch.
pub fn s_parameter(b: f64, c: f64) -> Result<f64> {
    validate_rates(b, c)?;
    Ok((2.0 + c - b) / (1.0 + b * c))
}

/// Weight multiplier of the `(1-b, 1+c)` branch.
pub const SECOND_BRANCH_S: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModeRatios {
    /// `b/c`, prey-to-predator amplitude ratio of the `s₁` branch.
    pub z1: f64,
    /// `(1-b)/(1+c)`, ratio of the `s = 2` branch.
    pub z2: f64,
    pub degenerate: bool,
    /// Within [`DEGENERATE_BAND`] of the locus, where the spectrum is ill-conditioned.
    pub near_degenerate: bool,
}

/// Closed-form roots of `c(1+c)z² - (b+c)z + b(1-b) = 0`.
pub fn mode_ratios(b: f64, c: f64) -> Result<ModeRatios> {
    validate_rates(b, c)?;
    let dist = degenerate_distance(b, c);
    Ok(ModeRatios {
        z1: b / c,
        z2: (1.0 - b) / (1.0 + c),
        degenerate: dist <= DEGENERATE_TOL,
        near_degenerate: dist <= DEGENERATE_BAND,
    })
}

/// `|b - c/(2c+1)|`.
pub fn degenerate_distance(b: f64, c: f64) -> f64 {
    (b - c / (2.0 * c + 1.0)).abs()
}

/// One eigenvalue of `-J`, with an eigenvector when it was computed.
#[derive(Clone, Debug)]
pub struct CoupledMode {
    pub mu: C64,
    /// `(φ, ψ)` with unit combined Euclidean norm, present for real eigenvalues.
    pub vector: Option<(Field, Field)>,
    /// `‖-Jx - μx‖ / ‖x‖`; NaN when no vector was computed.
    pub residual: f64,
    /// Position in a cluster of nearly equal eigenvalues (0 for singletons).
    pub cluster_size: usize,
}

#[derive(Clone, Debug)]
pub struct CoupledSpectrum {
    /// Ascending by real part.
    pub modes: Vec<CoupledMode>,
}

impl CoupledSpectrum {
    pub fn eigenvalues(&self) -> Vec<C64> {
        self.modes.iter().map(|m| m.mu).collect()
    }

    pub fn max_imag(&self) -> f64 {
        self.modes.iter().map(|m| m.mu.im.abs()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoupledMethod {
    /// Arnoldi, dense fallback below [`COUPLED_DENSE_LIMIT`] unknowns.
    Auto,
    Arnoldi,
    Dense,
}

#[derive(Clone, Copy, Debug)]
pub struct CoupledOptions {
    pub tol: f64,
    pub method: CoupledMethod,
    /// Also compute eigenvectors for real eigenvalues.
    pub vectors: bool,
}

impl CoupledOptions {
    pub fn with_tol(tol: f64) -> Self {
        CoupledOptions {
            tol,
            method: CoupledMethod::Auto,
            vectors: true,
        }
    }
}

/// The `k` eigenvalues of `-J` with smallest real part.
pub fn coupled_spectrum(jac: &CoupledJacobian, k: usize, tol: f64) -> Result<CoupledSpectrum> {
    coupled_spectrum_with(jac, k, &CoupledOptions::with_tol(tol))
}

pub fn coupled_spectrum_with(jac: &CoupledJacobian, k: usize, opts: &CoupledOptions) -> Result<CoupledSpectrum> {
    let dim = jac.dim();
    if k == 0 || k > dim {
        return Err(Error::InvalidParameter(format!(
            "requested {k} coupled eigenvalues of an operator with {dim} unknowns"
        )));
    }
    let values = match opts.method {
        CoupledMethod::Dense => dense_coupled_eigenvalues(jac, k),
        CoupledMethod::Arnoldi => arnoldi_eigenvalues(jac, k, opts.tol, dim)?,
        CoupledMethod::Auto => match arnoldi_eigenvalues(jac, k, opts.tol, auto_basis_cap(dim)) {
            Ok(v) => v,
            Err(Error::NonConvergence { .. }) if dim < COUPLED_DENSE_LIMIT => dense_coupled_eigenvalues(jac, k),
            Err(e) => return Err(e),
        },
    };
    attach_vectors(jac, values, opts.vectors)
}

/// Dense nonsymmetric oracle: all eigenvalues of `-J` via a real Schur form,
/// keeping the `k` with smallest real part.
pub fn dense_coupled_eigenvalues(jac: &CoupledJacobian, k: usize) -> Vec<C64> {
    let neg: DMatrix<f64> = -jac.matrix().to_dense();
    let mut all: Vec<C64> = neg.complex_eigenvalues().iter().copied().collect();
    sort_by_real(&mut all);
    all.truncate(k);
    all
}

fn sort_by_real(v: &mut [C64]) {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

/// Largest Krylov basis tried in `Auto` mode before giving up on Arnoldi.
/// Nearly defective eigenvalues converge slowly, and below the dense limit the
/// dense oracle is cheaper than a large basis.
fn auto_basis_cap(dim: usize) -> usize {
    if dim < COUPLED_DENSE_LIMIT {
        dim / 2
    } else {
        dim.min(800)
    }
}

/// Shift-invert Arnoldi on `(-J - σ)⁻¹` with σ below every real part, so the
/// Ritz values of largest modulus map to the eigenvalues nearest σ. The basis
/// is doubled until the wanted Ritz pairs meet the residual tolerance.
fn arnoldi_eigenvalues(jac: &CoupledJacobian, k: usize, tol: f64, max_basis: usize) -> Result<Vec<C64>> {
    let dim = jac.dim();
    let sigma = jac.real_part_lower_bound() - 1.0;
    let lu = jac.factor_negated_shift(sigma)?;
    let want = (k + 2).min(dim);
    let mut m = (2 * want + 20).min(dim);

    let mut rng = ChaCha8Rng::seed_from_u64(0xa5a5_0001);
    let start: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();

    loop {
        let (basis, h, m_eff) = arnoldi_factorization(&lu, &start, m);
        let hm = h.view((0, 0), (m_eff, m_eff)).into_owned();
        let mut ritz: Vec<C64> = hm.complex_eigenvalues().iter().copied().collect();
        ritz.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
        ritz.truncate(want.min(m_eff));

        let mut values = Vec::with_capacity(ritz.len());
        let mut residuals = Vec::with_capacity(ritz.len());
        for &theta in &ritz {
            let mu = C64::new(sigma, 0.0) + C64::new(1.0, 0.0) / theta;
            let y = small_inverse_iteration(&hm, theta);
            let (xr, xi) = combine(&basis[..m_eff], &y);
            residuals.push(complex_residual(jac, &xr, &xi, mu) / mu.norm().max(1.0));
            values.push(mu);
        }
        // Members of a tight cluster (a split Jordan pair) cannot have
        // individual residuals below the split; hold them to sqrt(tol).
        let worst = (0..values.len())
            .map(|i| {
                let scale = values[i].norm().max(1.0);
                let clustered =
                    (0..values.len()).any(|j| j != i && (values[i] - values[j]).norm() <= VECTOR_CLUSTER_GAP * scale);
                residuals[i] / if clustered { tol.sqrt() } else { tol }
            })
            .fold(0.0, f64::max)
            * tol;
        let exhausted = m_eff < m || m == dim;
        if worst <= tol || exhausted {
            // a full-dimensional (or invariant) Krylov space is exact up to rounding
            sort_by_real(&mut values);
            values.truncate(k);
            return Ok(values);
        }
        if m >= max_basis.max(want) {
            return Err(Error::NonConvergence {
                what: "coupled Arnoldi",
                iterations: m,
                residual: worst,
            });
        }
        m = (2 * m).min(dim).min(max_basis.max(m + 1));
    }
}

/// Arnoldi with two-pass Gram-Schmidt. Returns the basis, the
/// `(m+1) × m` Hessenberg matrix and the dimension actually reached.
fn arnoldi_factorization(lu: &InterleavedLu, start: &[f64], m: usize) -> (Vec<Vec<f64>>, DMatrix<f64>, usize) {
    let mut h = DMatrix::<f64>::zeros(m + 1, m);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let nrm = norm2(start);
    basis.push(start.iter().map(|x| x / nrm).collect());
    for j in 0..m {
        let mut w = lu.solve(&basis[j]);
        let scale = norm2(&w);
        for _ in 0..2 {
            for (i, q) in basis.iter().enumerate() {
                let proj = dot(q, &w);
                h[(i, j)] += proj;
                for (wt, qt) in w.iter_mut().zip(q) {
                    *wt -= proj * qt;
                }
            }
        }
        let beta = norm2(&w);
        h[(j + 1, j)] = beta;
        if beta <= 1e-14 * scale {
            return (basis, h, j + 1);
        }
        basis.push(w.into_iter().map(|x| x / beta).collect());
    }
    (basis, h, m)
}

/// Eigenvector of a small real matrix for the (possibly complex) eigenvalue `theta`.
fn small_inverse_iteration(hm: &DMatrix<f64>, theta: C64) -> Vec<C64> {
    let m = hm.nrows();
    let shift = theta * C64::new(1.0 + 1e-10, 1e-12);
    let shifted = DMatrix::from_fn(m, m, |i, j| {
        let v = C64::new(hm[(i, j)], 0.0);
        if i == j {
            v - shift
        } else {
            v
        }
    });
    let lu = shifted.lu();
    let mut y = nalgebra::DVector::from_fn(m, |i, _| C64::new(1.0 / (1.0 + i as f64), 0.5));
    for _ in 0..3 {
        if let Some(next) = lu.solve(&y) {
            let nrm = next.norm();
            if nrm.is_finite() && nrm > 0.0 {
                y = next / C64::new(nrm, 0.0);
            }
        }
    }
    y.iter().copied().collect()
}

fn combine(basis: &[Vec<f64>], y: &[C64]) -> (Vec<f64>, Vec<f64>) {
    let n = basis[0].len();
    let mut xr = vec![0.0; n];
    let mut xi = vec![0.0; n];
    for (q, c) in basis.iter().zip(y) {
        for t in 0..n {
            xr[t] += c.re * q[t];
            xi[t] += c.im * q[t];
        }
    }
    (xr, xi)
}

/// `‖-J x - μ x‖ / ‖x‖` for complex `x = xr + i·xi`.
fn complex_residual(jac: &CoupledJacobian, xr: &[f64], xi: &[f64], mu: C64) -> f64 {
    let jr = jac.apply(xr);
    let ji = jac.apply(xi);
    let mut r2 = 0.0;
    for t in 0..xr.len() {
        let re = -jr[t] - (mu.re * xr[t] - mu.im * xi[t]);
        let im = -ji[t] - (mu.re * xi[t] + mu.im * xr[t]);
        r2 += re * re + im * im;
    }
    (r2 / (dot(xr, xr) + dot(xi, xi))).sqrt()
}

fn is_real(mu: C64) -> bool {
    mu.im.abs() <= 1e-8 * mu.re.abs().max(1.0)
}

/// Groups ascending values whose consecutive relative gap is below `gap`.
fn clusters(values: &[f64], gap: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        let split = i == values.len() || (values[i] - values[i - 1]).abs() > gap * values[i - 1].abs().max(1.0);
        if split {
            out.push(start..i);
            start = i;
        }
    }
    out
}

/// Relative gap under which computed coupled eigenvalues share an invariant
/// subspace for eigenvector purposes. Split Jordan pairs separate by roughly
/// the square root of rounding error times the operator scale.
const VECTOR_CLUSTER_GAP: f64 = 1e-4;

/// Computes eigenvectors for real eigenvalues by (block) inverse iteration.
/// Members of a cluster share one shift, the cluster mean, and are iterated
/// together so they span the cluster's invariant subspace.
fn attach_vectors(jac: &CoupledJacobian, values: Vec<C64>, vectors: bool) -> Result<CoupledSpectrum> {
    let n = jac.grid.len();
    let mut modes: Vec<CoupledMode> = values
        .iter()
        .map(|&mu| CoupledMode {
            mu,
            vector: None,
            residual: f64::NAN,
            cluster_size: 1,
        })
        .collect();
    if !vectors {
        return Ok(CoupledSpectrum { modes });
    }
    let real_idx: Vec<usize> = (0..values.len()).filter(|&i| is_real(values[i])).collect();
    let reals: Vec<f64> = real_idx.iter().map(|&i| values[i].re).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0xa5a5_0002);
    let groups = clusters(&reals, VECTOR_CLUSTER_GAP);
    for (g, range) in groups.iter().enumerate() {
        let members: Vec<usize> = range.clone().map(|r| real_idx[r]).collect();
        let mean = reals[range.clone()].iter().sum::<f64>() / members.len() as f64;
        // A shift on top of a (numerically split) Jordan pair is singular to
        // rounding and loses the generalized direction; back off from it.
        let (shift, sharpen) = if members.len() > 1 {
            let below = (g > 0).then(|| mean - reals[groups[g - 1].end - 1]);
            let above = groups.get(g + 1).map(|r| reals[r.start] - mean);
            let nearest = below.into_iter().chain(above).fold(f64::INFINITY, f64::min);
            (mean - (1e-2 * mean.abs().max(1.0)).min(0.25 * nearest), Some(mean))
        } else {
            (mean, None)
        };
        let block = inverse_iteration_block(jac, shift, members.len(), sharpen, &mut rng)?;
        for (slot, &mi) in members.iter().enumerate() {
            let x = &block[slot];
            let mu = values[mi].re;
            let jx = jac.apply(x);
            let r: Vec<f64> = jx.iter().zip(x).map(|(j, xv)| -j - mu * xv).collect();
            modes[mi].residual = norm2(&r) / norm2(x);
            modes[mi].cluster_size = members.len();
            modes[mi].vector = Some((
                Field::new(jac.grid, x[..n].to_vec())?,
                Field::new(jac.grid, x[n..].to_vec())?,
            ));
        }
    }
    Ok(CoupledSpectrum { modes })
}

fn factor_near(jac: &CoupledJacobian, shift: f64) -> Result<InterleavedLu> {
    match jac.factor_negated_shift(shift) {
        Err(Error::Singular(_)) => jac.factor_negated_shift(shift + 1e-12 * shift.abs().max(1.0)),
        other => other,
    }
}

/// Orthonormal basis for the invariant subspace near `shift`. With
/// `sharpen = Some(μ)` the leading vector is refined by single-vector inverse
/// iteration next to `μ` so it approximates the eigenvector of a Jordan pair.
fn inverse_iteration_block(
    jac: &CoupledJacobian,
    shift: f64,
    size: usize,
    sharpen: Option<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<f64>>> {
    let dim = jac.dim();
    let lu = factor_near(jac, shift)?;
    let mut block: Vec<Vec<f64>> = (0..size)
        .map(|_| (0..dim).map(|_| rng.random::<f64>() - 0.5).collect())
        .collect();
    orthonormalize(&mut block);
    for _ in 0..12 {
        block = block.iter().map(|x| lu.solve(x)).collect();
        orthonormalize(&mut block);
    }
    if let Some(mu) = sharpen {
        let lu = factor_near(jac, mu - 1e-9 * mu.abs().max(1.0))?;
        for _ in 0..3 {
            let y = lu.solve(&block[0]);
            let nrm = norm2(&y);
            block[0] = y.into_iter().map(|v| v / nrm).collect();
        }
        orthonormalize(&mut block);
    }
    for x in &mut block {
        // deterministic sign: largest-magnitude entry positive
        let peak = x
            .iter()
            .copied()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(1.0);
        if peak < 0.0 {
            x.iter_mut().for_each(|v| *v = -*v);
        }
    }
    Ok(block)
}

/// `‖JΦ + λΦ‖ / ‖Φ‖` for `Φ = (d₁ ϕ, d₂ ϕ)` and every scalar pair `(λ, ϕ)`.
/// No eigensolver is involved on the coupled side.
pub fn ansatz_residuals(jac: &CoupledJacobian, scalar: &Spectrum, direction: (f64, f64)) -> Vec<f64> {
    let n = jac.grid.len();
    scalar
        .pairs
        .iter()
        .map(|pair| {
            let mut x = vec![0.0; 2 * n];
            for (i, p) in pair.phi.values().iter().enumerate() {
                x[i] = direction.0 * p;
                x[n + i] = direction.1 * p;
            }
            let jx = jac.apply(&x);
            let r: Vec<f64> = jx.iter().zip(&x).map(|(j, xv)| j + pair.lambda * xv).collect();
            norm2(&r) / norm2(&x)
        })
        .collect()
}

/// Result of applying `ξ = (2c+1)φ - ψ` to a computed coupled eigenvector.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Reduction {
    /// `‖ξ‖ / ‖(φ, ψ)‖`.
    pub xi_fraction: f64,
    /// Relative scalar residual `‖(Δ + a - 2θ)ξ + μξ‖ / (‖ξ‖ max(1,|μ|))`,
    /// zero when ξ vanishes.
    pub scalar_residual: f64,
}

impl Reduction {
    pub fn passes(&self, tol: f64) -> bool {
        self.xi_fraction <= tol || self.scalar_residual <= tol
    }
}

/// Applies the degenerate-locus reduction to each computed vector of
/// `spectrum`. `theta` is the logistic solution behind the state.
pub fn degenerate_reduction(
    jac: &CoupledJacobian,
    theta: &Field,
    spectrum: &CoupledSpectrum,
) -> Result<Vec<Reduction>> {
    let c = jac.params.c;
    let weight = jac.params.a.zip_with(theta, |a, t| a - 2.0 * t)?;
    let op = assemble_operator(&jac.grid, &weight)?;
    let reals: Vec<f64> = spectrum.modes.iter().map(|m| m.mu.re).collect();
    let mut out = Vec::new();
    for range in clusters(&reals, VECTOR_CLUSTER_GAP) {
        let mean = reals[range.clone()].iter().sum::<f64>() / range.len() as f64;
        for mode in &spectrum.modes[range] {
            let Some((phi, psi)) = &mode.vector else { continue };
            let xi = phi.zip_with(psi, |p, q| (2.0 * c + 1.0) * p - q)?;
            let total = (dot(phi.values(), phi.values()) + dot(psi.values(), psi.values())).sqrt();
            let xi_norm = norm2(xi.values());
            let fraction = xi_norm / total;
            let scalar_residual = if xi_norm == 0.0 {
                0.0
            } else {
                let l = op.apply(xi.values());
                let r: Vec<f64> = l.iter().zip(xi.values()).map(|(l, x)| l + mean * x).collect();
                norm2(&r) / xi_norm / mean.abs().max(1.0)
            };
            out.push(Reduction {
                xi_fraction: fraction,
                scalar_residual,
            });
        }
    }
    Ok(out)
}

/// Best-fit amplitude ratio `z = ⟨φ,ψ⟩/⟨ψ,ψ⟩`, minimizing `‖φ - zψ‖`.
pub fn fitted_ratio(phi: &Field, psi: &Field) -> f64 {
    dot(phi.values(), psi.values()) / dot(psi.values(), psi.values())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Stable,
    Unstable,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

impl From<C64> for ComplexValue {
    fn from(c: C64) -> Self {
        ComplexValue { re: c.re, im: c.im }
    }
}

/// Outcome of the full stability pipeline at the synchronized state.
#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub a_min: f64,
    pub a_max: f64,
    pub b: f64,
    pub c: f64,
    pub nodes: usize,
    /// `s₁ = (2 + c - b)/(1 + bc)`.
    pub s_value: f64,
    /// Multiplier of the `(1-b, 1+c)` branch, always 2.
    pub s_second: f64,
    pub degenerate: bool,
    pub near_degenerate: bool,
    /// Eigenvalues of `-J`, ascending by real part.
    pub coupled_eigs: Vec<ComplexValue>,
    pub coupled_residuals: Vec<f64>,
    /// `{λ_i(a - s₁θ)} ∪ {λ_i(a - 2θ)}`, ascending.
    pub predicted_eigs: Vec<f64>,
    /// Weight multiplier that produced each predicted value.
    pub predicted_branch: Vec<f64>,
    /// Cluster-aware relative mismatch between the coupled and predicted lists.
    pub max_rel_mismatch: f64,
    /// Elementwise relative mismatch with no clustering.
    pub raw_rel_mismatch: f64,
    /// Largest spread inside a compared cluster of coupled eigenvalues.
    pub max_cluster_split: f64,
    /// Relative mismatch against `{λ_i(a - s₁θ)}` listed twice, i.e. assuming both
    /// amplitude directions share the multiplier `s₁`.
    pub single_weight_mismatch: f64,
    pub max_imag: f64,
    /// Per-eigenvector `min(|z - z₁|/z₁, |z - z₂|/z₂)`; empty near the degenerate locus.
    pub ratio_errors: Vec<f64>,
    /// Largest `‖JΦ + λΦ‖/‖Φ‖` over both branch ansätze.
    pub ansatz_residual: f64,
    /// Degenerate locus only: worst reduction residual over computed vectors.
    pub reduction_residual: Option<f64>,
    /// Smallest real part of the coupled spectrum (the decay rate of perturbations).
    pub mu1: f64,
    pub min_predicted: f64,
    pub mismatch_threshold: f64,
    pub logistic_residual: f64,
    pub verdict: Verdict,
    pub cause: Option<String>,
}

impl StabilityReport {
    fn inconclusive(params: &ModelParams, s_value: f64, ratios: ModeRatios, cause: String) -> Self {
        StabilityReport {
            a_min: params.a.min(),
            a_max: params.a.max(),
            b: params.b,
            c: params.c,
            nodes: params.a.len(),
            s_value,
            s_second: SECOND_BRANCH_S,
            degenerate: ratios.degenerate,
            near_degenerate: ratios.near_degenerate,
            coupled_eigs: Vec::new(),
            coupled_residuals: Vec::new(),
            predicted_eigs: Vec::new(),
            predicted_branch: Vec::new(),
            max_rel_mismatch: f64::NAN,
            raw_rel_mismatch: f64::NAN,
            max_cluster_split: f64::NAN,
            single_weight_mismatch: f64::NAN,
            max_imag: f64::NAN,
            ratio_errors: Vec::new(),
            ansatz_residual: f64::NAN,
            reduction_residual: None,
            mu1: f64::NAN,
            min_predicted: f64::NAN,
            mismatch_threshold: f64::NAN,
            logistic_residual: f64::NAN,
            verdict: Verdict::Inconclusive,
            cause: Some(cause),
        }
    }

    /// CSV `i,coupled_re,coupled_im,predicted,rel_err` (1-based `i`).
    pub fn eigen_table_csv(&self) -> String {
        let mut s = String::from("i,coupled_re,coupled_im,predicted,rel_err\n");
        for (i, (c, p)) in self.coupled_eigs.iter().zip(&self.predicted_eigs).enumerate() {
            let rel = relative_error(c.re, *p);
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                i + 1,
                fmt_sci(c.re),
                fmt_sci(c.im),
                fmt_sci(*p),
                fmt_sci(rel)
            );
        }
        s
    }
}

fn relative_error(x: f64, reference: f64) -> f64 {
    let scale = reference.abs();
    if scale > 1e-12 {
        (x - reference).abs() / scale
    } else {
        (x - reference).abs()
    }
}

/// Cluster-aware comparison of two ascending lists of equal length. Clusters
/// are runs of `predicted` with relative gaps below `gap`; within each, the
/// means are compared. Returns
/// `(max relative mismatch, largest spread among the matching coupled values)`.
pub fn compare_multisets(coupled: &[f64], predicted: &[f64], gap: f64) -> (f64, f64) {
    let len = coupled.len().min(predicted.len());
    let mut worst: f64 = 0.0;
    let mut split: f64 = 0.0;
    for range in clusters(&predicted[..len], gap) {
        let count = range.len() as f64;
        let pc = predicted[range.clone()].iter().sum::<f64>() / count;
        let cc = coupled[range.clone()].iter().sum::<f64>() / count;
        worst = worst.max(relative_error(cc, pc));
        let lo = coupled[range.clone()].iter().copied().fold(f64::INFINITY, f64::min);
        let hi = coupled[range].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        split = split.max(hi - lo);
    }
    (worst, split)
}

/// Options for [`verify_theorem`].
#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    pub tol: f64,
    pub method: CoupledMethod,
}

impl VerifyOptions {
    pub fn with_tol(tol: f64) -> Self {
        VerifyOptions {
            tol,
            method: CoupledMethod::Auto,
        }
    }
}

/// Full pipeline: logistic solve, synchronized state, Jacobian, coupled
/// spectrum (`2k` values), scalar spectra of both branches, comparison and
/// verdict. Invalid rates are an error; solver failures yield an
/// inconclusive report carrying the cause.
pub fn verify_theorem(params: &ModelParams, grid: &Grid, k: usize, tol: f64) -> Result<StabilityReport> {
    verify_theorem_with(params, grid, k, &VerifyOptions::with_tol(tol))
}

pub fn verify_theorem_with(
    params: &ModelParams,
    grid: &Grid,
    k: usize,
    opts: &VerifyOptions,
) -> Result<StabilityReport> {
    let s1 = s_parameter(params.b, params.c)?;
    let ratios = mode_ratios(params.b, params.c)?;
    params.a.require_grid(grid, "growth rate")?;
    if k == 0 || 2 * k > 2 * grid.len() {
        return Err(Error::InvalidParameter(format!("k = {k} out of range")));
    }
    let theta = match solve_logistic(grid, &params.a, opts.tol) {
        Ok(t) => t,
        Err(Error::Subcritical { lambda1 }) => {
            return Ok(StabilityReport::inconclusive(
                params,
                s1,
                ratios,
                format!("no positive steady state: subcritical, λ₁(a) = {lambda1:.6e}"),
            ))
        }
        Err(e) => return Ok(StabilityReport::inconclusive(params, s1, ratios, e.to_string())),
    };
    match analyze(params, grid, k, opts, &theta, s1, ratios) {
        Ok(r) => Ok(r),
        Err(e) => Ok(StabilityReport::inconclusive(params, s1, ratios, e.to_string())),
    }
}

fn branch_spectrum(grid: &Grid, a: &Field, theta: &Field, s: f64, k: usize, tol: f64) -> Result<Spectrum> {
    let weight = a.zip_with(theta, |a, t| a - s * t)?;
    eigenpairs(&assemble_operator(grid, &weight)?, k, tol)
}

fn analyze(
    params: &ModelParams,
    grid: &Grid,
    k: usize,
    opts: &VerifyOptions,
    theta: &LogisticSolution,
    s1: f64,
    ratios: ModeRatios,
) -> Result<StabilityReport> {
    let tol = opts.tol;
    let state = synchronized_state(params, theta)?;
    let jac = assemble_jacobian(&state.u, &state.v, params, grid)?;
    let total = 2 * k;

    // 2k per branch so the merged list is complete up to its 2k-th entry
    let per_branch = total.min(grid.len());
    let coupled_opts = CoupledOptions {
        tol,
        method: opts.method,
        vectors: true,
    };
    let (branches, spectrum) = rayon::join(
        || -> Result<(Spectrum, Spectrum)> {
            let first = branch_spectrum(grid, &params.a, &theta.theta, s1, per_branch, tol)?;
            let second = if ratios.degenerate {
                first.clone()
            } else {
                branch_spectrum(grid, &params.a, &theta.theta, SECOND_BRANCH_S, per_branch, tol)?
            };
            Ok((first, second))
        },
        || coupled_spectrum_with(&jac, total, &coupled_opts),
    );
    let (first, second) = branches?;
    let spectrum = spectrum?;
    let mut predicted: Vec<(f64, f64)> = first
        .eigenvalues()
        .into_iter()
        .map(|l| (l, s1))
        .chain(second.eigenvalues().into_iter().map(|l| (l, SECOND_BRANCH_S)))
        .collect();
    predicted.sort_by(|x, y| x.0.total_cmp(&y.0));
    predicted.truncate(total);
    let predicted_eigs: Vec<f64> = predicted.iter().map(|p| p.0).collect();
    let predicted_branch: Vec<f64> = predicted.iter().map(|p| p.1).collect();

    let coupled_re: Vec<f64> = spectrum.modes.iter().map(|m| m.mu.re).collect();
    let gap = if ratios.near_degenerate {
        VECTOR_CLUSTER_GAP
    } else {
        CLUSTER_GAP
    };
    let (max_rel_mismatch, max_cluster_split) = compare_multisets(&coupled_re, &predicted_eigs, gap);
    let raw_rel_mismatch = coupled_re
        .iter()
        .zip(&predicted_eigs)
        .map(|(c, p)| relative_error(*c, *p))
        .fold(0.0, f64::max);
    let single: Vec<f64> = first.eigenvalues().iter().flat_map(|&l| [l, l]).take(total).collect();
    let (single_weight_mismatch, _) = compare_multisets(&coupled_re, &single, gap);

    let ratio_errors = if ratios.near_degenerate {
        Vec::new()
    } else {
        spectrum
            .modes
            .iter()
            .filter(|m| m.cluster_size == 1)
            .filter_map(|m| m.vector.as_ref())
            .map(|(phi, psi)| {
                let z = fitted_ratio(phi, psi);
                ((z - ratios.z1).abs() / ratios.z1).min((z - ratios.z2).abs() / ratios.z2)
            })
            .collect()
    };

    let k_ansatz = k.min(first.pairs.len());
    let trim = |s: &Spectrum| Spectrum {
        pairs: s.pairs[..k_ansatz].to_vec(),
        weight: s.weight.clone(),
        tol: s.tol,
    };
    let ansatz_residual = ansatz_residuals(&jac, &trim(&first), (params.b, params.c))
        .into_iter()
        .chain(ansatz_residuals(&jac, &trim(&second), (1.0 - params.b, 1.0 + params.c)))
        .fold(0.0, f64::max);

    let reduction_residual = if ratios.degenerate {
        let red = degenerate_reduction(&jac, &theta.theta, &spectrum)?;
        Some(
            red.iter()
                .map(|r| r.xi_fraction.min(r.scalar_residual))
                .fold(0.0, f64::max),
        )
    } else {
        None
    };

    let mu1 = coupled_re.iter().copied().fold(f64::INFINITY, f64::min);
    let min_predicted = predicted_eigs.iter().copied().fold(f64::INFINITY, f64::min);
    let mismatch_threshold = if ratios.near_degenerate {
        (100.0 * tol).max(DEGENERATE_MISMATCH_TOL)
    } else {
        100.0 * tol
    };
    let matches = max_rel_mismatch <= mismatch_threshold;
    let verdict = match (matches, min_predicted > 0.0 && mu1 > 0.0) {
        (true, true) => Verdict::Stable,
        (true, false) => Verdict::Unstable,
        (false, _) => Verdict::Inconclusive,
    };
    let cause = (!matches)
        .then(|| format!("coupled and predicted spectra differ by {max_rel_mismatch:.3e} > {mismatch_threshold:.1e}"));

    Ok(StabilityReport {
        a_min: params.a.min(),
        a_max: params.a.max(),
        b: params.b,
        c: params.c,
        nodes: grid.len(),
        s_value: s1,
        s_second: SECOND_BRANCH_S,
        degenerate: ratios.degenerate,
        near_degenerate: ratios.near_degenerate,
        coupled_eigs: spectrum.modes.iter().map(|m| m.mu.into()).collect(),
        coupled_residuals: spectrum.modes.iter().map(|m| m.residual).collect(),
        predicted_eigs,
        predicted_branch,
        max_rel_mismatch,
        raw_rel_mismatch,
        max_cluster_split,
        single_weight_mismatch,
        max_imag: spectrum.max_imag(),
        ratio_errors,
        ansatz_residual,
        reduction_residual,
        mu1,
        min_predicted,
        mismatch_threshold,
        logistic_residual: theta.residual_norm,
        verdict,
        cause,
    })
}
