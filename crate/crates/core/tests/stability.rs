mod common;

use proptest::prelude::*;

use lvsync::linstab::{
    assemble_jacobian, coupled_spectrum, fitted_ratio, mode_ratios, verify_theorem, verify_theorem_with, CoupledMethod,
    Verdict, VerifyOptions,
};
use lvsync::model::{predator_only_state, prey_only_state, synchronized_state};
use lvsync::{Field, Grid, ModelParams};

#[test]
fn square_domain_two_branch_union() {
    let g = Grid::rectangle(1.0, 1.0, 24, 24).unwrap();
    let params = ModelParams::new(Field::constant(&g, 30.0), 0.5, 1.0).unwrap();
    let r = verify_theorem(&params, &g, 5, 1e-10).unwrap();
    assert_eq!(r.verdict, Verdict::Stable, "{:?}", r.cause);
    assert!(r.max_rel_mismatch <= 1e-8, "{}", r.max_rel_mismatch);
    assert!(r.single_weight_mismatch > 1e-3);
    assert!(r.max_imag <= 1e-8);
}

#[test]
fn variable_growth_profile() {
    let g = common::interval(150);
    let a = Field::from_fn(&g, |p| 3.0 + 1.5 * p[0].sin());
    let params = ModelParams::new(a, 0.3, 2.0).unwrap();
    let r = verify_theorem(&params, &g, 6, 1e-10).unwrap();
    assert_eq!(r.verdict, Verdict::Stable);
    assert!(r.max_rel_mismatch <= 1e-8, "{}", r.max_rel_mismatch);
    assert!(r.ansatz_residual <= 1e-8, "{}", r.ansatz_residual);
}

#[test]
fn growth_with_negative_patches() {
    // supercritical overall, hostile near the left end
    let g = common::interval(150);
    let a = Field::from_fn(&g, |p| if p[0] < 0.5 { -1.0 } else { 4.0 });
    let params = ModelParams::new(a, 0.6, 0.5).unwrap();
    let r = verify_theorem(&params, &g, 4, 1e-10).unwrap();
    assert_eq!(r.verdict, Verdict::Stable);
    assert!(r.mu1 > 0.0);
}

#[test]
fn near_degenerate_band() {
    let g = common::interval(120);
    let params = common::constant_params(&g, 2.0, 1.0 / 3.0 + 5e-5, 1.0);
    let r = verify_theorem(&params, &g, 6, 1e-10).unwrap();
    assert!(r.near_degenerate && !r.degenerate);
    assert!(r.ratio_errors.is_empty());
    assert_eq!(r.verdict, Verdict::Stable, "{:?}", r.cause);
}

#[test]
fn eigenvector_ratios_match_roots() {
    let (b, c) = (0.5, 1.0);
    let g = common::interval(120);
    let params = common::constant_params(&g, 2.0, b, c);
    let st = synchronized_state(&params, &common::theta(&g, 2.0, 1e-10)).unwrap();
    let jac = assemble_jacobian(&st.u, &st.v, &params, &g).unwrap();
    let spec = coupled_spectrum(&jac, 8, 1e-10).unwrap();
    let roots = mode_ratios(b, c).unwrap();
    for m in &spec.modes {
        let (phi, psi) = m.vector.as_ref().unwrap();
        let z = fitted_ratio(phi, psi);
        let err = ((z - roots.z1).abs() / roots.z1).min((z - roots.z2).abs() / roots.z2);
        assert!(err <= 1e-6, "μ = {}: ratio {z}", m.mu.re);
    }
}

#[test]
fn semitrivial_states_are_unstable() {
    let g = common::interval(100);
    let params = common::constant_params(&g, 2.0, 0.5, 1.0);
    let theta = common::theta(&g, 2.0, 1e-10);
    for (u, v) in [prey_only_state(&theta), predator_only_state(&theta)] {
        let jac = assemble_jacobian(&u, &v, &params, &g).unwrap();
        let mu1 = coupled_spectrum(&jac, 1, 1e-10).unwrap().modes[0].mu.re;
        assert!(mu1 < 0.0, "{mu1}");
    }
}

#[test]
fn dense_and_arnoldi_reports_agree() {
    let g = common::interval(90);
    let params = common::constant_params(&g, 3.0, 0.2, 4.0);
    let mut opts = VerifyOptions::with_tol(1e-10);
    opts.method = CoupledMethod::Dense;
    let dense = verify_theorem_with(&params, &g, 5, &opts).unwrap();
    opts.method = CoupledMethod::Arnoldi;
    let arnoldi = verify_theorem_with(&params, &g, 5, &opts).unwrap();
    for (x, y) in dense.coupled_eigs.iter().zip(&arnoldi.coupled_eigs) {
        assert!((x.re - y.re).abs() <= 1e-8 * y.re.abs());
    }
    assert_eq!(dense.verdict, arnoldi.verdict);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_parameters_verify_and_are_stable(b in 0.02f64..0.98, c in 0.05f64..6.0, a in 1.2f64..8.0) {
        let g = common::interval(60);
        let params = common::constant_params(&g, a, b, c);
        let r = verify_theorem(&params, &g, 4, 1e-10).unwrap();
        prop_assert_eq!(r.verdict, Verdict::Stable);
        prop_assert!(r.max_rel_mismatch <= r.mismatch_threshold);
        prop_assert!(r.mu1 > 0.0 && r.min_predicted > 0.0);
    }
}
