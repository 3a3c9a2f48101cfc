//! Small sparse and banded linear-algebra kernels.
//!
//! Every operator in this crate lives on a uniform box grid, so the matrices
//! are banded once the nodes are ordered lexicographically. A banded LU with
//! partial pivoting covers the Newton systems, the implicit diffusion solves and
//! the shift-invert eigen iterations.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by_key(|e| (e.0, e.1));

        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
            last = Some((r, c));
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates `(col, value)` over stored entries of one row.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// Iterates `(row, col, value)` over all stored entries.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(j, _)| j == c).map_or(0.0, |(_, v)| v)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// Largest `|A_ij - A_ji|` over the stored pattern of both triangles.
    pub fn max_asymmetry(&self) -> f64 {
        self.triplets()
            .map(|(r, c, v)| (v - self.get(c, r)).abs())
            .fold(0.0, f64::max)
    }

    /// Lower and upper bandwidth.
    pub fn bandwidth(&self) -> (usize, usize) {
        self.triplets().fold((0, 0), |(kl, ku), (r, c, _)| {
            if r > c {
                (kl.max(r - c), ku)
            } else {
                (kl, ku.max(c - r))
            }
        })
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }
}

/// LU factorization with partial pivoting of a square banded matrix.
///
/// Row `i` stores absolute columns `i - kl ..= i + kl + ku`; the extra `kl`
/// columns on the right absorb fill from row interchanges.
#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    upper: Vec<f64>,
    multipliers: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    /// Factors the `n × n` matrix whose nonzeros are produced by `entries`.
    /// Entries outside the declared band are a programming error.
    pub fn factor<I>(n: usize, kl: usize, ku: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let width = 2 * kl + ku + 1;
        let mut upper = vec![0.0; n * width];
        let slot = |i: usize, j: usize| i * width + (j + kl - i);
        for (i, j, v) in entries {
            assert!(j + kl >= i && j <= i + ku, "entry ({i}, {j}) outside band ({kl}, {ku})");
            upper[slot(i, j)] += v;
        }

        let mut multipliers = vec![0.0; n * kl.max(1)];
        let mut pivots = vec![0usize; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = upper[slot(k, k)].abs();
            for i in k + 1..=last_row {
                let v = upper[slot(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(Error::Singular(k));
            }
            pivots[k] = p;
            let last_col = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    upper.swap(slot(k, j), slot(p, j));
                }
            }
            let pivot = upper[slot(k, k)];
            for i in k + 1..=last_row {
                let m = upper[slot(i, k)] / pivot;
                multipliers[k * kl + (i - k - 1)] = m;
                upper[slot(i, k)] = 0.0;
                if m != 0.0 {
                    for j in k + 1..=last_col {
                        upper[slot(i, j)] -= m * upper[slot(k, j)];
                    }
                }
            }
        }
        Ok(BandedLu {
            n,
            kl,
            ku,
            width,
            upper,
            multipliers,
            pivots,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let (n, kl, ku, width) = (self.n, self.kl, self.ku, self.width);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                let last = (k + kl).min(n - 1);
                for (bi, m) in b[k + 1..=last].iter_mut().zip(&self.multipliers[k * kl..]) {
                    *bi -= m * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let row = &self.upper[k * width..(k + 1) * width];
            let mut acc = b[k];
            for j in k + 1..=(k + kl + ku).min(n - 1) {
                acc -= row[j + kl - k] * b[j];
            }
            b[k] = acc / row[kl];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub(crate) fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Orthonormalizes the columns of `basis` in place (two passes of classical
/// Gram-Schmidt). Columns that collapse are replaced by unit vectors orthogonal
/// to the rest when possible.
pub(crate) fn orthonormalize(basis: &mut [Vec<f64>]) {
    for j in 0..basis.len() {
        for _ in 0..2 {
            for i in 0..j {
                let (head, tail) = basis.split_at_mut(j);
                let proj = dot(&head[i], &tail[0]);
                for (t, q) in tail[0].iter_mut().zip(&head[i]) {
                    *t -= proj * q;
                }
            }
        }
        let nrm = norm2(&basis[j]);
        if nrm > 0.0 {
            basis[j].iter_mut().for_each(|v| *v /= nrm);
        }
    }
}
