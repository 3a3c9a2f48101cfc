#![allow(dead_code)]

use std::f64::consts::PI;

use lvsync::elliptic::{solve_logistic, LogisticSolution};
use lvsync::{Field, Grid, ModelParams};

pub fn interval(n: usize) -> Grid {
    Grid::interval(PI, n).unwrap()
}

pub fn constant_params(grid: &Grid, a: f64, b: f64, c: f64) -> ModelParams {
    ModelParams::new(Field::constant(grid, a), b, c).unwrap()
}

pub fn theta(grid: &Grid, a: f64, tol: f64) -> LogisticSolution {
    solve_logistic(grid, &Field::constant(grid, a), tol).unwrap()
}

/// Cubic Lagrange interpolation of a 1D field through the four nodes around `x`.
pub fn value_at(f: &Field, x: f64) -> f64 {
    let g = f.grid();
    let h = g.spacing()[0];
    let n = g.len();
    let pos = (x - g.origin()[0]) / h - 1.0;
    let first = (pos.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let nodes: Vec<(f64, f64)> = (first..first + 4).map(|i| (g.coords(i)[0], f.values()[i])).collect();
    let mut sum = 0.0;
    for (j, &(xj, yj)) in nodes.iter().enumerate() {
        let mut w = 1.0;
        for (m, &(xm, _)) in nodes.iter().enumerate() {
            if m != j {
                w *= (x - xm) / (xj - xm);
            }
        }
        sum += w * yj;
    }
    sum
}

/// Order `p` with `(v1 - v2)/(v2 - v3) = (h1^p - h2^p)/(h2^p - h3^p)`, by bisection.
pub fn observed_order(h: [f64; 3], v: [f64; 3]) -> f64 {
    let target = (v[0] - v[1]) / (v[1] - v[2]);
    let f = |p: f64| (h[0].powf(p) - h[1].powf(p)) / (h[1].powf(p) - h[2].powf(p)) - target;
    let (mut lo, mut hi) = (0.1, 8.0);
    if f(lo).signum() == f(hi).signum() {
        return f64::NAN;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid).signum() == f(lo).signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `log(e1/e2)/log(h1/h2)` for errors against a known limit.
pub fn order_from_errors(h1: f64, e1: f64, h2: f64, e2: f64) -> f64 {
    (e1 / e2).ln() / (h1 / h2).ln()
}
