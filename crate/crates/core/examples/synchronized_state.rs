//! The synchronized equilibrium (αθ, βθ) and its residual in the full system.

use std::f64::consts::PI;

use lvsync::elliptic::solve_logistic;
use lvsync::model::{synchronized_state, system_residual};
use lvsync::{Field, Grid, ModelParams};

fn main() -> lvsync::Result<()> {
    let g = Grid::interval(PI, 200)?;
    let a = Field::constant(&g, 2.0);
    let theta = solve_logistic(&g, &a, 1e-10)?;
    for (b, c) in [(0.5, 1.0), (0.1, 4.0), (0.9, 0.5)] {
        let params = ModelParams::new(a.clone(), b, c)?;
        let st = synchronized_state(&params, &theta)?;
        let (ru, rv) = system_residual(&st.u, &st.v, &params)?;
        println!(
            "b = {b}, c = {c}: α = {:.6}, β = {:.6}, max u = {:.6}, max v = {:.6}, residuals {ru:.1e} / {rv:.1e}",
            st.alpha,
            st.beta,
            st.u.max(),
            st.v.max()
        );
    }
    println!("logistic residual {:.1e}", theta.residual_norm);
    Ok(())
}
