//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line to stderr
//! (uncaptured, so it shows in plain `cargo test` output) and then asserts.
//!
//! Criteria 1 and 2 compare both amplitude directions against the single
//! multiplier `s₁`. The `(1-b, 1+c)` direction actually pairs with the
//! multiplier 2, so those two criteria fail by construction; the `*_corrected`
//! companions check the two-branch statement with the same tolerances.

mod common;

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lvsync::dynamics::{decay_rate, evolve, principal_perturbation};
use lvsync::elliptic::{logistic_residual, uniqueness_probe};
use lvsync::grid::assemble_operator;
use lvsync::linstab::{
    ansatz_residuals, assemble_jacobian, coupled_spectrum, dense_coupled_eigenvalues, s_parameter, verify_theorem,
};
use lvsync::model::{ratio_coefficients, synchronized_state, system_residual};
use lvsync::spectral::{dense_eigenpairs, eigenpairs, interval_laplacian_eigenvalue, Spectrum};
use lvsync::{Field, Grid};

fn report(id: &str, ok: bool, detail: &str) {
    let line = format!("acceptance {id}: {} ({detail})\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn check(id: &str, failures: Vec<String>, detail: String) {
    report(id, failures.is_empty(), &detail);
    assert!(failures.is_empty(), "{id}: {}", failures.join("; "));
}

fn rel(x: f64, y: f64) -> f64 {
    (x - y).abs() / y.abs().max(1e-300)
}

/// Scalar spectrum of `-(Δ + a - sθ)` by the dense symmetric solver.
fn branch(grid: &Grid, a: f64, theta: &Field, s: f64, k: usize) -> Spectrum {
    let w = theta.map(|t| a - s * t);
    dense_eigenpairs(&assemble_operator(grid, &w).unwrap(), k).unwrap()
}

fn duplicated(values: &[f64]) -> Vec<f64> {
    values.iter().flat_map(|&x| [x, x]).collect()
}

struct Setup {
    grid: Grid,
    theta: Field,
    jac: lvsync::linstab::CoupledJacobian,
}

fn setup(n: usize, a: f64, b: f64, c: f64) -> Setup {
    let grid = common::interval(n);
    let params = common::constant_params(&grid, a, b, c);
    let sol = common::theta(&grid, a, 1e-10);
    let st = synchronized_state(&params, &sol).unwrap();
    let jac = assemble_jacobian(&st.u, &st.v, &params, &grid).unwrap();
    Setup {
        grid,
        theta: sol.theta,
        jac,
    }
}

#[test]
fn criterion_01_coupled_spectrum_duplicates_single_branch() {
    let start = Instant::now();
    let s = setup(200, 2.0, 0.5, 1.0);
    let coupled = coupled_spectrum(&s.jac, 12, 1e-10).unwrap();
    let elapsed = start.elapsed();
    let dense = dense_coupled_eigenvalues(&s.jac, 12);
    let s1 = s_parameter(0.5, 1.0).unwrap();
    let expected = duplicated(&branch(&s.grid, 2.0, &s.theta, s1, 6).eigenvalues());

    let mut failures = Vec::new();
    let mismatch = coupled
        .modes
        .iter()
        .zip(&expected)
        .map(|(m, e)| rel(m.mu.re, *e))
        .fold(0.0, f64::max);
    let dense_gap = coupled
        .modes
        .iter()
        .zip(&dense)
        .map(|(m, d)| rel(m.mu.re, d.re))
        .fold(0.0, f64::max);
    let imag = coupled
        .max_imag()
        .max(dense.iter().map(|d| d.im.abs()).fold(0.0, f64::max));
    if mismatch > 1e-8 {
        failures.push(format!("relative mismatch {mismatch:.3e} > 1e-8"));
    }
    if dense_gap > 1e-8 {
        failures.push(format!("iterative vs dense {dense_gap:.3e} > 1e-8"));
    }
    if imag > 1e-8 {
        failures.push(format!("imaginary part {imag:.3e} > 1e-8"));
    }
    if elapsed > Duration::from_secs(10) {
        failures.push(format!("runtime {elapsed:?} > 10 s"));
    }
    check(
        "1",
        failures,
        format!("mismatch {mismatch:.3e}, dense agreement {dense_gap:.3e}, max imag {imag:.1e}, {elapsed:.2?}"),
    );
}

#[test]
fn criterion_01_corrected_two_branch_union() {
    let start = Instant::now();
    let s = setup(200, 2.0, 0.5, 1.0);
    let coupled = coupled_spectrum(&s.jac, 12, 1e-10).unwrap();
    let elapsed = start.elapsed();
    let dense = dense_coupled_eigenvalues(&s.jac, 12);
    let s1 = s_parameter(0.5, 1.0).unwrap();
    let mut expected = branch(&s.grid, 2.0, &s.theta, s1, 6).eigenvalues();
    expected.extend(branch(&s.grid, 2.0, &s.theta, 2.0, 6).eigenvalues());
    expected.sort_by(f64::total_cmp);

    let mut failures = Vec::new();
    let mismatch = coupled
        .modes
        .iter()
        .zip(&expected)
        .map(|(m, e)| rel(m.mu.re, *e))
        .fold(0.0, f64::max);
    let dense_gap = coupled
        .modes
        .iter()
        .zip(&dense)
        .map(|(m, d)| rel(m.mu.re, d.re))
        .fold(0.0, f64::max);
    let imag = coupled
        .max_imag()
        .max(dense.iter().map(|d| d.im.abs()).fold(0.0, f64::max));
    for (name, v) in [("mismatch", mismatch), ("dense agreement", dense_gap), ("imag", imag)] {
        if v > 1e-8 {
            failures.push(format!("{name} {v:.3e} > 1e-8"));
        }
    }
    if elapsed > Duration::from_secs(10) {
        failures.push(format!("runtime {elapsed:?} > 10 s"));
    }
    check(
        "1 (two-branch)",
        failures,
        format!("mismatch {mismatch:.3e}, dense agreement {dense_gap:.3e}, max imag {imag:.1e}, {elapsed:.2?}"),
    );
}

#[test]
fn criterion_02_ansatz_both_directions_single_branch() {
    let s = setup(200, 2.0, 0.5, 1.0);
    let s1 = s_parameter(0.5, 1.0).unwrap();
    let spec = branch(&s.grid, 2.0, &s.theta, s1, 6);
    let first = ansatz_residuals(&s.jac, &spec, (0.5, 1.0));
    let second = ansatz_residuals(&s.jac, &spec, (0.5, 2.0));
    let r1 = first.iter().copied().fold(0.0, f64::max);
    let r2 = second.iter().copied().fold(0.0, f64::max);
    let mut failures = Vec::new();
    if r1 > 1e-9 {
        failures.push(format!("(b, c) residual {r1:.3e} > 1e-9"));
    }
    if r2 > 1e-9 {
        failures.push(format!("(1-b, 1+c) residual {r2:.3e} > 1e-9"));
    }
    check("2", failures, format!("(b,c) {r1:.3e}, (1-b,1+c) {r2:.3e}"));
}

#[test]
fn criterion_02_corrected_second_direction_uses_multiplier_two() {
    let s = setup(200, 2.0, 0.5, 1.0);
    let s1 = s_parameter(0.5, 1.0).unwrap();
    let r1 = ansatz_residuals(&s.jac, &branch(&s.grid, 2.0, &s.theta, s1, 6), (0.5, 1.0))
        .into_iter()
        .fold(0.0, f64::max);
    let r2 = ansatz_residuals(&s.jac, &branch(&s.grid, 2.0, &s.theta, 2.0, 6), (0.5, 2.0))
        .into_iter()
        .fold(0.0, f64::max);
    let mut failures = Vec::new();
    for (name, r) in [("(b, c) with s₁", r1), ("(1-b, 1+c) with 2", r2)] {
        if r > 1e-9 {
            failures.push(format!("{name} residual {r:.3e} > 1e-9"));
        }
    }
    check(
        "2 (two-branch)",
        failures,
        format!("(b,c)/s₁ {r1:.3e}, (1-b,1+c)/2 {r2:.3e}"),
    );
}

#[test]
fn criterion_03_degenerate_locus() {
    let (b, c) = (1.0 / 3.0, 1.0);
    let sv = s_parameter(b, c).unwrap();
    let ulps = (sv.to_bits() as i64 - 2.0f64.to_bits() as i64).abs();
    let g = common::interval(200);
    let params = common::constant_params(&g, 2.0, b, c);
    let rep = verify_theorem(&params, &g, 6, 1e-10).unwrap();
    let theta = common::theta(&g, 2.0, 1e-10).theta;
    let expected = duplicated(&branch(&g, 2.0, &theta, 2.0, 6).eigenvalues());
    let elementwise = rep
        .coupled_eigs
        .iter()
        .zip(&expected)
        .map(|(m, e)| rel(m.re, *e))
        .fold(0.0, f64::max);
    let reduction = rep.reduction_residual.unwrap_or(f64::INFINITY);

    let mut failures = Vec::new();
    if ulps > 4 {
        failures.push(format!("s = {sv:e} is {ulps} ulp from 2"));
    }
    if !rep.degenerate {
        failures.push("not flagged degenerate".into());
    }
    if rep.coupled_eigs.len() != 12 {
        failures.push(format!("{} coupled eigenvalues", rep.coupled_eigs.len()));
    }
    if elementwise > 1e-6 || rep.max_rel_mismatch > 1e-6 {
        failures.push(format!(
            "mismatch {elementwise:.3e} / cluster {:.3e} > 1e-6",
            rep.max_rel_mismatch
        ));
    }
    if reduction > 1e-6 {
        failures.push(format!("reduction residual {reduction:.3e} > 1e-6"));
    }
    check(
        "3",
        failures,
        format!(
            "s off by {ulps} ulp, elementwise {elementwise:.3e}, cluster {:.3e}, reduction {reduction:.3e}",
            rep.max_rel_mismatch
        ),
    );
}

#[test]
fn criterion_04_stability_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let start = Instant::now();
    let code = lvsync::cli::run([
        "lvsync",
        "sweep",
        "--out",
        out.to_str().unwrap(),
        "--format",
        "json",
        "--a",
        "2",
        "--n",
        "100",
        "--sweep-b",
        "0.1:0.9:0.1",
        "--sweep-c",
        "0.5,1,2,4",
    ]);
    let elapsed = start.elapsed();
    let text = std::fs::read_to_string(out.join("results.jsonl")).unwrap_or_default();
    let records: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let bad: Vec<String> = records
        .iter()
        .filter(|r| r["verdict"] != "stable" || r["mu1"].as_f64().is_none_or(|m| m <= 0.0))
        .map(|r| format!("b={} c={} {}", r["b"], r["c"], r["verdict"]))
        .collect();
    let min_mu = records
        .iter()
        .filter_map(|r| r["mu1"].as_f64())
        .fold(f64::INFINITY, f64::min);

    let mut failures = Vec::new();
    if code != 0 {
        failures.push(format!("exit code {code}"));
    }
    if records.len() != 36 {
        failures.push(format!("{} records", records.len()));
    }
    if !bad.is_empty() {
        failures.push(format!("not stable: {}", bad.join(", ")));
    }
    if elapsed > Duration::from_secs(300) {
        failures.push(format!("runtime {elapsed:?} > 5 min"));
    }
    check(
        "4",
        failures,
        format!("{} jobs, min μ₁ {min_mu:.6}, {elapsed:.2?}", records.len()),
    );
}

fn fitted_rate(dt: f64, store_every: usize) -> (f64, f64, f64) {
    let g = common::interval(200);
    let params = common::constant_params(&g, 2.0, 0.5, 1.0);
    let sol = common::theta(&g, 2.0, 1e-10);
    let st = synchronized_state(&params, &sol).unwrap();
    let (u0, v0, mu1) = principal_perturbation(&st, &params, 1e-3).unwrap();
    let traj = evolve(&u0, &v0, &params, dt, 20.0, store_every).unwrap();
    let fit = decay_rate(&traj, &st).unwrap();
    (fit.rate, fit.r_squared, mu1)
}

#[test]
fn criterion_05_decay_rate() {
    let (rate, r2, mu1) = fitted_rate(1e-3, 100);
    let (rate_half, r2_half, _) = fitted_rate(5e-4, 200);
    let err = rel(rate, -mu1);
    let change = rel(rate_half, rate);
    let mut failures = Vec::new();
    if err > 0.05 {
        failures.push(format!("rate {rate:.6} vs -μ₁ {:.6}: {err:.3e} > 5%", -mu1));
    }
    if r2 < 0.999 || r2_half < 0.999 {
        failures.push(format!("r² {r2:.6} / {r2_half:.6} < 0.999"));
    }
    if change >= 0.01 {
        failures.push(format!("dt halving changes rate by {change:.3e}"));
    }
    check(
        "5",
        failures,
        format!(
            "rate {rate:.6}, -μ₁ {:.6}, error {err:.3e}, r² {r2:.6}, dt-halving change {change:.3e}",
            -mu1
        ),
    );
}

#[test]
fn criterion_06_scalar_infrastructure() {
    let mut failures = Vec::new();

    let mut closed = 0.0f64;
    for n in [50, 200] {
        let g = common::interval(n);
        let h = PI / (n as f64 + 1.0);
        let spec = eigenpairs(&assemble_operator(&g, &Field::zeros(&g)).unwrap(), 5, 1e-10).unwrap();
        for (i, lam) in spec.eigenvalues().iter().enumerate() {
            let k = (i + 1) as f64;
            let exact = 4.0 / (h * h) * (k * h / 2.0).sin().powi(2);
            assert!(rel(exact, interval_laplacian_eigenvalue(PI, n, i + 1)) <= 1e-15);
            closed = closed.max(rel(*lam, exact));
        }
    }
    if closed > 1e-12 {
        failures.push(format!("Laplacian closed form {closed:.3e} > 1e-12"));
    }

    let g = common::interval(200);
    let mut zero = 0.0f64;
    for a in [1.5, 2.0, 5.0] {
        let sol = common::theta(&g, a, 1e-10);
        let w = sol.theta.map(|t| a - t);
        let lam = eigenpairs(&assemble_operator(&g, &w).unwrap(), 1, 1e-10)
            .unwrap()
            .eigenvalues()[0];
        zero = zero.max(lam.abs());
    }
    if zero > 1e-8 {
        failures.push(format!("|λ₁(a - θ_a)| {zero:.3e} > 1e-8"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let g = common::interval(100);
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..50 {
        let m1: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-5.0..5.0)).collect();
        let m2: Vec<f64> = m1.iter().map(|x| x + rng.random_range(0.0..2.0)).collect();
        let l1 = eigenpairs(&assemble_operator(&g, &Field::new(g, m1).unwrap()).unwrap(), 4, 1e-10)
            .unwrap()
            .eigenvalues();
        let l2 = eigenpairs(&assemble_operator(&g, &Field::new(g, m2).unwrap()).unwrap(), 4, 1e-10)
            .unwrap()
            .eigenvalues();
        for (x, y) in l1.iter().zip(&l2) {
            worst = worst.max(y - x);
            if y > x {
                violations += 1;
            }
        }
    }
    if violations > 0 {
        failures.push(format!("{violations} monotonicity violations"));
    }
    check(
        "6",
        failures,
        format!("closed form {closed:.3e}, |λ₁(a-θ)| {zero:.3e}, max λ(m₂)-λ(m₁) {worst:.3e} over 50 pairs"),
    );
}

#[test]
fn criterion_07_steady_state_identities() {
    // c over the working range (0, 4]; see the scaled companion for larger c
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_id = 0.0f64;
    let mut samples = Vec::new();
    for _ in 0..1000 {
        let b: f64 = rng.random_range(1e-6..1.0);
        let c: f64 = rng.random_range(1e-6..=4.0);
        let (alpha, beta) = ratio_coefficients(b, c).unwrap();
        worst_id = worst_id
            .max((alpha + b * beta - 1.0).abs())
            .max((beta - c * alpha - 1.0).abs());
        samples.push((b, c));
    }
    let g = common::interval(200);
    let sol = common::theta(&g, 2.0, 1e-10);
    let lres = logistic_residual(&sol.theta, &sol.a).unwrap();
    let mut worst_ratio = 0.0f64;
    for &(b, c) in samples.iter().step_by(50) {
        let params = common::constant_params(&g, 2.0, b, c);
        let st = synchronized_state(&params, &sol).unwrap();
        let (ru, rv) = system_residual(&st.u, &st.v, &params).unwrap();
        worst_ratio = worst_ratio.max(ru.max(rv) / lres);
    }
    let mut failures = Vec::new();
    if worst_id > 1e-15 {
        failures.push(format!("identity error {worst_id:.3e} > 1e-15"));
    }
    if worst_ratio > 10.0 {
        failures.push(format!("system / logistic residual {worst_ratio:.3} > 10"));
    }
    check(
        "7",
        failures,
        format!("identity error {worst_id:.3e}, system/logistic residual ≤ {worst_ratio:.3} (logistic {lres:.3e})"),
    );
}

#[test]
fn criterion_08_uniqueness_probe() {
    let g1 = common::interval(200);
    let p1 = uniqueness_probe(&g1, &Field::constant(&g1, 2.0), 20, 1e-10, 0).unwrap();
    let g2 = Grid::rectangle(1.0, 1.0, 40, 40).unwrap();
    let p2 = uniqueness_probe(&g2, &Field::constant(&g2, 25.0), 20, 1e-10, 0).unwrap();
    let mut failures = Vec::new();
    for (name, p) in [("a=2 on (0,π)", &p1), ("a=25 on (0,1)²", &p2)] {
        if p.starts.len() != 20 || p.distinct_positive() != 1 {
            failures.push(format!(
                "{name}: {} distinct from {} starts",
                p.distinct_positive(),
                p.starts.len()
            ));
        }
    }
    check(
        "8",
        failures,
        format!(
            "1D {} distinct ({} non-convergent), 2D {} distinct ({} non-convergent)",
            p1.distinct_positive(),
            p1.non_convergent(),
            p2.distinct_positive(),
            p2.non_convergent()
        ),
    );
}

#[test]
fn criterion_09_grid_convergence() {
    let ns = [100usize, 200, 400, 800];
    let hs: Vec<f64> = ns.iter().map(|&n| PI / (n as f64 + 1.0)).collect();
    let mids: Vec<f64> = ns
        .iter()
        .map(|&n| common::value_at(&common::theta(&common::interval(n), 2.0, 1e-10).theta, PI / 2.0))
        .collect();
    let lams: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let g = common::interval(n);
            eigenpairs(&assemble_operator(&g, &Field::zeros(&g)).unwrap(), 1, 1e-10)
                .unwrap()
                .eigenvalues()[0]
        })
        .collect();
    let theta_orders: Vec<f64> = (0..2)
        .map(|i| common::observed_order([hs[i], hs[i + 1], hs[i + 2]], [mids[i], mids[i + 1], mids[i + 2]]))
        .collect();
    let lam_orders: Vec<f64> = (0..3)
        .map(|i| common::order_from_errors(hs[i], (lams[i] - 1.0).abs(), hs[i + 1], (lams[i + 1] - 1.0).abs()))
        .collect();
    let failures: Vec<String> = theta_orders
        .iter()
        .map(|p| ("θ(π/2)", p))
        .chain(lam_orders.iter().map(|p| ("λ₁", p)))
        .filter(|(_, p)| p.is_nan() || (**p - 2.0).abs() > 0.2)
        .map(|(name, p)| format!("{name} order {p:.4}"))
        .collect();
    check(
        "9",
        failures,
        format!("θ(π/2) orders {theta_orders:.4?}, λ₁ orders {lam_orders:.4?}"),
    );
}

#[test]
fn criterion_07_identities_scaled_for_large_c() {
    // for large c the terms exceed 1, so the bound scales with β
    let mut rng = ChaCha8Rng::seed_from_u64(70);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let b: f64 = rng.random_range(1e-6..1.0);
        let c: f64 = rng.random_range(1e-6..100.0);
        let (alpha, beta) = ratio_coefficients(b, c).unwrap();
        let scale = beta.max(1.0);
        worst = worst
            .max((alpha + b * beta - 1.0).abs() / scale)
            .max((beta - c * alpha - 1.0).abs() / scale);
    }
    let failures = if worst > 1e-15 {
        vec![format!("scaled identity error {worst:.3e} > 1e-15")]
    } else {
        Vec::new()
    };
    check(
        "7 (c up to 100)",
        failures,
        format!("scaled identity error {worst:.3e}"),
    );
}

fn read_tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n != "timings.jsonl") {
                let name = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((name, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn criterion_10_determinism() {
    // Same output path both times: config.json echoes it.
    let dir = tempfile::tempdir().unwrap();
    let runs: Vec<Vec<(String, Vec<u8>)>> = (0..2)
        .map(|_| {
            let root = &dir.path().join("run");
            if root.exists() {
                std::fs::remove_dir_all(root).unwrap();
            }
            let out = |s: &str| root.join(s).to_string_lossy().into_owned();
            let commands: Vec<Vec<String>> = vec![
                vec![
                    "theta".into(),
                    "--probe-starts".into(),
                    "9".into(),
                    "--out".into(),
                    out("theta"),
                ],
                vec![
                    "verify".into(),
                    "--n".into(),
                    "120".into(),
                    "--out".into(),
                    out("verify"),
                ],
                vec![
                    "evolve".into(),
                    "--n".into(),
                    "60".into(),
                    "--t-end".into(),
                    "2".into(),
                    "--perturbation".into(),
                    "random".into(),
                    "--snapshots".into(),
                    "0,1,2".into(),
                    "--out".into(),
                    out("evolve"),
                ],
                vec![
                    "sweep".into(),
                    "--n".into(),
                    "60".into(),
                    "--sweep-b".into(),
                    "0.2,0.6".into(),
                    "--sweep-c".into(),
                    "0.5,2".into(),
                    "--workers".into(),
                    "3".into(),
                    "--format".into(),
                    "json".into(),
                    "--out".into(),
                    out("sweep"),
                ],
            ];
            for cmd in commands {
                let mut args = vec!["lvsync".to_string(), "--seed".into(), "42".into()];
                args.extend(cmd);
                assert_eq!(lvsync::cli::run(&args), 0, "{args:?}");
            }
            read_tree(root)
        })
        .collect();
    let mut failures = Vec::new();
    let names = |r: &[(String, Vec<u8>)]| r.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>();
    if names(&runs[0]) != names(&runs[1]) {
        failures.push("file sets differ".into());
    }
    for ((name, a), (_, b)) in runs[0].iter().zip(&runs[1]) {
        if a != b {
            failures.push(format!("{name} differs"));
        }
    }
    check(
        "10",
        failures,
        format!("{} files compared byte for byte", runs[0].len()),
    );
}
