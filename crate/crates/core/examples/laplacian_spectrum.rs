//! Eigenvalues of the discrete Dirichlet Laplacian on (0, π) against the
//! closed form, and a weighted operator on the unit square.

use std::f64::consts::PI;

use lvsync::grid::assemble_operator;
use lvsync::spectral::{eigenpairs, interval_laplacian_eigenvalue};
use lvsync::{Field, Grid};

fn main() -> lvsync::Result<()> {
    let n = 200;
    let g = Grid::interval(PI, n)?;
    let spec = eigenpairs(&assemble_operator(&g, &Field::zeros(&g))?, 5, 1e-10)?;
    println!("k  computed              closed form           continuum");
    for (i, p) in spec.pairs.iter().enumerate() {
        let k = i + 1;
        println!(
            "{k}  {:<20.14} {:<20.14}  {}",
            p.lambda,
            interval_laplacian_eigenvalue(PI, n, k),
            k * k
        );
    }

    let sq = Grid::rectangle(1.0, 1.0, 40, 40)?;
    let m = Field::from_fn(&sq, |p| 10.0 * (PI * p[0]).sin() * (PI * p[1]).sin());
    let spec = eigenpairs(&assemble_operator(&sq, &m)?, 4, 1e-10)?;
    println!(
        "\n-(Δ + m) on (0,1)², m = 10 sin(πx) sin(πy): {:.8?}",
        spec.eigenvalues()
    );
    println!("max residual {:.2e}", spec.max_residual());
    Ok(())
}
