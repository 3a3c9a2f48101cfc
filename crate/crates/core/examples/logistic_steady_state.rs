//! The logistic steady state θ for a few growth rates, its residual, and the
//! multi-start uniqueness probe.

use std::f64::consts::PI;

use lvsync::elliptic::{solve_logistic, uniqueness_probe};
use lvsync::{Error, Field, Grid};

fn main() -> lvsync::Result<()> {
    let g = Grid::interval(PI, 200)?;
    for a in [0.5, 1.1, 1.5, 2.0, 5.0] {
        match solve_logistic(&g, &Field::constant(&g, a), 1e-10) {
            Ok(sol) => println!(
                "a = {a:<4}: max θ = {:.10}, residual {:.2e}, {} Newton steps",
                sol.theta.max(),
                sol.residual_norm,
                sol.newton_iterations
            ),
            Err(Error::Subcritical { lambda1 }) => {
                println!("a = {a:<4}: subcritical, λ₁(a) = {lambda1:.6}")
            }
            Err(e) => return Err(e),
        }
    }

    let probe = uniqueness_probe(&g, &Field::constant(&g, 2.0), 12, 1e-10, 1)?;
    println!("\nprobe at a = 2 from {} starts:", probe.starts.len());
    for s in &probe.starts {
        println!(
            "  {:<24} converged={} iterations={:>2} solution={:?}",
            s.label, s.converged, s.iterations, s.solution
        );
    }
    println!("distinct positive solutions: {}", probe.distinct_positive());
    Ok(())
}
