//! On b = c/(2c+1) both branches share the multiplier 2 and the
//! linearization has Jordan pairs. Eigenvalues are compared as cluster means
//! and computed vectors are mapped through ξ = (2c+1)φ - ψ.

use std::f64::consts::PI;

use lvsync::linstab::{degenerate_distance, verify_theorem};
use lvsync::{Field, Grid, ModelParams};

fn main() -> lvsync::Result<()> {
    let g = Grid::interval(PI, 200)?;
    for c in [0.5, 1.0, 2.0] {
        let b = c / (2.0 * c + 1.0);
        let params = ModelParams::new(Field::constant(&g, 2.0), b, c)?;
        let r = verify_theorem(&params, &g, 4, 1e-10)?;
        println!(
            "c = {c}, b = {b:.6} (distance {:.1e}): s = {:.15}, degenerate={}, mismatch {:.1e}, pair split {:.1e}, reduction {:.1e}, {:?}",
            degenerate_distance(b, c),
            r.s_value,
            r.degenerate,
            r.max_rel_mismatch,
            r.max_cluster_split,
            r.reduction_residual.unwrap_or(f64::NAN),
            r.verdict
        );
    }
    Ok(())
}
