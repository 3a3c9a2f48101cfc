//! Box domains, discrete fields and the Dirichlet Laplacian.
//!
//! Only interior nodes are stored; boundary values are zero by construction.
//! Nodes are ordered lexicographically with the x index running fastest, so
//! node `(ix, iy)` has flat index `ix + nx * iy`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{BandedLu, CsrMatrix};

/// Formats a float with 17 significant digits in lowercase scientific form.
pub fn fmt_sci(v: f64) -> String {
    format!("{v:.16e}")
}

/// Geometric description of a computational domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Domain {
    Interval {
        start: f64,
        end: f64,
        n: usize,
    },
    Rectangle {
        x: [f64; 2],
        y: [f64; 2],
        nx: usize,
        ny: usize,
    },
}

impl Domain {
    /// `(0, length)` with `n` interior nodes.
    pub fn interval(length: f64, n: usize) -> Self {
        Domain::Interval {
            start: 0.0,
            end: length,
            n,
        }
    }

    /// `(0, lx) × (0, ly)` with `nx × ny` interior nodes.
    pub fn rectangle(lx: f64, ly: f64, nx: usize, ny: usize) -> Self {
        Domain::Rectangle {
            x: [0.0, lx],
            y: [0.0, ly],
            nx,
            ny,
        }
    }
}

/// A validated uniform grid over a [`Domain`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    domain: Domain,
    dim: usize,
    origin: [f64; 2],
    extent: [f64; 2],
    shape: [usize; 2],
    spacing: [f64; 2],
}

impl Grid {
    pub fn new(domain: Domain) -> Result<Self> {
        let (dim, origin, extent, shape) = match domain {
            Domain::Interval { start, end, n } => (1, [start, 0.0], [end - start, 1.0], [n, 1]),
            Domain::Rectangle { x, y, nx, ny } => (2, [x[0], y[0]], [x[1] - x[0], y[1] - y[0]], [nx, ny]),
        };
        for axis in 0..dim {
            let len = extent[axis];
            if !(len.is_finite() && len > 0.0) || !origin[axis].is_finite() {
                return Err(Error::InvalidDomain(format!(
                    "axis {axis} has non-positive or non-finite extent {len}"
                )));
            }
            if shape[axis] < 3 {
                return Err(Error::ResolutionTooSmall(shape[axis]));
            }
        }
        let mut spacing = [1.0, 1.0];
        for axis in 0..dim {
            spacing[axis] = extent[axis] / (shape[axis] + 1) as f64;
        }
        Ok(Grid {
            domain,
            dim,
            origin,
            extent,
            shape,
            spacing,
        })
    }

    pub fn interval(length: f64, n: usize) -> Result<Self> {
        Grid::new(Domain::interval(length, n))
    }

    pub fn rectangle(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        Grid::new(Domain::rectangle(lx, ly, nx, ny))
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// Spatial dimension, 1 or 2.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of interior nodes.
    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Interior node counts; the second entry is 1 for intervals.
    pub fn shape(&self) -> [usize; 2] {
        self.shape
    }

    /// Mesh spacing per axis (only the first `dim()` entries are meaningful).
    pub fn spacing(&self) -> [f64; 2] {
        self.spacing
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn extent(&self) -> [f64; 2] {
        self.extent
    }

    /// Quadrature weight `h₁·…·h_d` used by the discrete L2 norm.
    pub fn cell_volume(&self) -> f64 {
        self.spacing[..self.dim].iter().product()
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        ix + self.shape[0] * iy
    }

    /// Coordinates of node `idx`; the second entry is 0 for intervals.
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let ix = idx % self.shape[0];
        let iy = idx / self.shape[0];
        let x = self.origin[0] + (ix + 1) as f64 * self.spacing[0];
        if self.dim == 1 {
            [x, 0.0]
        } else {
            [x, self.origin[1] + (iy + 1) as f64 * self.spacing[1]]
        }
    }

    /// Half-bandwidth of the Laplacian in lexicographic order.
    pub(crate) fn stencil_reach(&self) -> usize {
        if self.dim == 1 {
            1
        } else {
            self.shape[0]
        }
    }

    fn inv_h2(&self) -> [f64; 2] {
        [
            1.0 / (self.spacing[0] * self.spacing[0]),
            1.0 / (self.spacing[1] * self.spacing[1]),
        ]
    }

    /// Diagonal entry of the discrete Laplacian.
    pub fn laplacian_diagonal(&self) -> f64 {
        let inv = self.inv_h2();
        if self.dim == 1 {
            -2.0 * inv[0]
        } else {
            -2.0 * inv[0] - 2.0 * inv[1]
        }
    }

    /// Calls `f(neighbor, coupling)` for each interior neighbour of `idx`.
    pub(crate) fn for_each_neighbor(&self, idx: usize, mut f: impl FnMut(usize, f64)) {
        let inv = self.inv_h2();
        let [nx, ny] = self.shape;
        let ix = idx % nx;
        let iy = idx / nx;
        if ix > 0 {
            f(idx - 1, inv[0]);
        }
        if ix + 1 < nx {
            f(idx + 1, inv[0]);
        }
        if self.dim == 2 {
            if iy > 0 {
                f(idx - nx, inv[1]);
            }
            if iy + 1 < ny {
                f(idx + nx, inv[1]);
            }
        }
    }

    /// The 3-point (1D) or 5-point (2D) Dirichlet Laplacian.
    pub fn laplacian(&self) -> CsrMatrix {
        let diag = self.laplacian_diagonal();
        let mut triplets = Vec::with_capacity(self.len() * (2 * self.dim + 1));
        for i in 0..self.len() {
            triplets.push((i, i, diag));
            self.for_each_neighbor(i, |j, w| triplets.push((i, j, w)));
        }
        CsrMatrix::from_triplets(self.len(), self.len(), &triplets)
    }

    /// `out = Δ x`, written as a sum of neighbour differences.
    pub(crate) fn apply_laplacian(&self, x: &[f64], out: &mut [f64]) {
        let inv = self.inv_h2();
        let [nx, ny] = self.shape;
        for iy in 0..ny {
            for ix in 0..nx {
                let i = ix + nx * iy;
                let xi = x[i];
                let left = if ix > 0 { x[i - 1] } else { 0.0 };
                let right = if ix + 1 < nx { x[i + 1] } else { 0.0 };
                let mut acc = ((left - xi) + (right - xi)) * inv[0];
                if self.dim == 2 {
                    let down = if iy > 0 { x[i - nx] } else { 0.0 };
                    let up = if iy + 1 < ny { x[i + nx] } else { 0.0 };
                    acc += ((down - xi) + (up - xi)) * inv[1];
                }
                out[i] = acc;
            }
        }
    }

    /// `xᵀ(-Δ)x`, evaluated as a sum of squared differences over all grid
    /// edges (including edges to the zero boundary), which keeps full relative
    /// precision for smooth vectors.
    pub(crate) fn dirichlet_energy(&self, x: &[f64]) -> f64 {
        let inv = self.inv_h2();
        let [nx, ny] = self.shape;
        let mut ex = 0.0;
        let mut ey = 0.0;
        for iy in 0..ny {
            let row = &x[iy * nx..(iy + 1) * nx];
            ex += row[0] * row[0];
            for w in row.windows(2) {
                ex += (w[1] - w[0]) * (w[1] - w[0]);
            }
            ex += row[nx - 1] * row[nx - 1];
        }
        if self.dim == 2 {
            for ix in 0..nx {
                let first = x[ix];
                let last = x[ix + nx * (ny - 1)];
                ey += first * first + last * last;
                for iy in 0..ny - 1 {
                    let d = x[ix + nx * (iy + 1)] - x[ix + nx * iy];
                    ey += d * d;
                }
            }
        }
        ex * inv[0] + ey * inv[1]
    }

    fn check_same(&self, other: &Grid, what: &str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{what}: {self:?} vs {other:?}")))
        }
    }
}

/// Real values at the interior nodes of a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid with {} interior nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Field::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Field {
            grid: *grid,
            values: vec![value; grid.len()],
        }
    }

    /// Samples `f` at the node coordinates (`[x, 0]` on intervals).
    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        Field {
            grid: *grid,
            values: (0..grid.len()).map(|i| f(grid.coords(i))).collect(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.grid.check_same(&other.grid, "zip_with")?;
        Ok(Field {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn scaled(&self, s: f64) -> Field {
        self.map(|v| s * v)
    }

    pub fn l2_norm(&self) -> f64 {
        l2_norm(self)
    }

    pub fn max_abs_diff(&self, other: &Field) -> Result<f64> {
        self.grid.check_same(&other.grid, "max_abs_diff")?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Discrete Laplacian of this field.
    pub fn laplacian(&self) -> Field {
        let mut out = vec![0.0; self.len()];
        self.grid.apply_laplacian(&self.values, &mut out);
        Field {
            grid: self.grid,
            values: out,
        }
    }

    pub(crate) fn require_grid(&self, grid: &Grid, what: &str) -> Result<()> {
        self.grid.check_same(grid, what)
    }

    /// CSV text with header `index,coord1[,coord2],value`.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        if self.grid.dim() == 1 {
            s.push_str("index,coord1,value\n");
        } else {
            s.push_str("index,coord1,coord2,value\n");
        }
        for (i, &v) in self.values.iter().enumerate() {
            let [x, y] = self.grid.coords(i);
            if self.grid.dim() == 1 {
                let _ = writeln!(s, "{i},{},{}", fmt_sci(x), fmt_sci(v));
            } else {
                let _ = writeln!(s, "{i},{},{},{}", fmt_sci(x), fmt_sci(y), fmt_sci(v));
            }
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Parses CSV written by [`Field::to_csv`] onto `grid`. Only the `value`
    /// column is used; row order must be lexicographic.
    pub fn from_csv(grid: &Grid, text: &str) -> Result<Field> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty field file".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let value_col = cols
            .iter()
            .position(|&c| c == "value")
            .ok_or_else(|| Error::Parse(format!("no `value` column in header `{header}`")))?;
        let mut values = Vec::with_capacity(grid.len());
        for (row, line) in lines.enumerate() {
            let cell = line
                .split(',')
                .nth(value_col)
                .ok_or_else(|| Error::Parse(format!("row {row}: missing value column")))?;
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("row {row}: `{cell}`: {e}")))?;
            values.push(v);
        }
        Field::new(*grid, values)
    }

    pub fn read_csv(grid: &Grid, path: impl AsRef<Path>) -> Result<Field> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Field::from_csv(grid, &text)
    }
}

/// `sqrt(Σ f_i² · h₁·…·h_d)`.
pub fn l2_norm(f: &Field) -> f64 {
    (f.values.iter().map(|v| v * v).sum::<f64>() * f.grid.cell_volume()).sqrt()
}

pub fn l2_inner(f: &Field, g: &Field) -> Result<f64> {
    f.grid.check_same(&g.grid, "l2_inner")?;
    Ok(f.values.iter().zip(&g.values).map(|(a, b)| a * b).sum::<f64>() * f.grid.cell_volume())
}

/// The discrete operator `L(m) = Δ + diag(m)` with zero Dirichlet data.
///
/// The stencil and the weight are kept apart; [`WeightedOperator::matrix`]
/// assembles them on demand.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedOperator {
    grid: Grid,
    weight: Field,
}

pub fn assemble_operator(grid: &Grid, weight: &Field) -> Result<WeightedOperator> {
    weight.require_grid(grid, "operator weight")?;
    Ok(WeightedOperator {
        grid: *grid,
        weight: weight.clone(),
    })
}

impl WeightedOperator {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn weight(&self) -> &Field {
        &self.weight
    }

    /// `L(m + m₀)`.
    pub fn shifted(&self, m0: f64) -> WeightedOperator {
        WeightedOperator {
            grid: self.grid,
            weight: self.weight.map(|m| m + m0),
        }
    }

    /// Pure stencil part Δ.
    pub fn laplacian(&self) -> CsrMatrix {
        self.grid.laplacian()
    }

    /// Assembled sparse matrix of Δ + diag(m).
    pub fn matrix(&self) -> CsrMatrix {
        let diag = self.grid.laplacian_diagonal();
        let mut triplets = Vec::with_capacity(self.grid.len() * (2 * self.grid.dim() + 1));
        for i in 0..self.grid.len() {
            triplets.push((i, i, diag + self.weight.values[i]));
            self.grid.for_each_neighbor(i, |j, w| triplets.push((i, j, w)));
        }
        CsrMatrix::from_triplets(self.grid.len(), self.grid.len(), &triplets)
    }

    /// `L(m) x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.grid.apply_laplacian(x, &mut out);
        for ((o, &m), &xi) in out.iter_mut().zip(&self.weight.values).zip(x) {
            *o += m * xi;
        }
        out
    }

    /// `xᵀ(-L(m))x` via the edge-difference form of the Dirichlet energy.
    pub fn energy(&self, x: &[f64]) -> f64 {
        let potential: f64 = self.weight.values.iter().zip(x).map(|(m, v)| m * v * v).sum();
        self.grid.dirichlet_energy(x) - potential
    }

    /// Gershgorin lower bound on the spectrum of `-L(m)`.
    pub fn spectrum_lower_bound(&self) -> f64 {
        -self.weight.max()
    }

    /// Factors `-L(m) - σI`.
    pub(crate) fn factor_negated_shift(&self, sigma: f64) -> Result<BandedLu> {
        let n = self.grid.len();
        let reach = self.grid.stencil_reach();
        let diag = self.grid.laplacian_diagonal();
        let mut entries = Vec::with_capacity(n * (2 * self.grid.dim() + 1));
        for i in 0..n {
            entries.push((i, i, -(diag + self.weight.values[i]) - sigma));
            self.grid.for_each_neighbor(i, |j, w| entries.push((i, j, -w)));
        }
        BandedLu::factor(n, reach, reach, entries)
    }
}
