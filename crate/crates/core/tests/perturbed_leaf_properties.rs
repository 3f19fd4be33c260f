use bernstein_lab::foliation::{integrate_leaf, LeafProfile};
use bernstein_lab::perturbed_leaf::{jacobi_field_derivs, linearized_apply, solve_linearized, PerturbedLeaf};
use proptest::prelude::*;
use std::sync::OnceLock;

fn leaf() -> &'static LeafProfile {
    static LEAF: OnceLock<LeafProfile> = OnceLock::new();
    LEAF.get_or_init(|| integrate_leaf(200.0, 1e-12).unwrap())
}

fn perturbed() -> &'static PerturbedLeaf {
    static PL: OnceLock<PerturbedLeaf> = OnceLock::new();
    PL.get_or_init(|| PerturbedLeaf::new(leaf().clone()).unwrap())
}

#[test]
fn dilation_field_is_annihilated() {
    for s in [0.1, 0.5, 1.0, 3.0, 10.0, 50.0] {
        let [f, fp, fpp] = jacobi_field_derivs(leaf(), s).unwrap();
        let lf = linearized_apply(f, fp, fpp, leaf(), s).unwrap();
        assert!(lf.abs() < 1e-6 * (1.0 + f.abs()), "L f0 = {lf:e} at s = {s}");
    }
}

#[test]
fn solve_then_apply_recovers_source() {
    let g = |s: f64| 1.0 / (1.0 + s * s);
    let sol = solve_linearized(g, leaf()).unwrap();
    let mut worst = 0.0_f64;
    for k in (1..sol.s.len()).step_by(7) {
        let s = sol.s[k];
        let lf = linearized_apply(sol.f[k], sol.f_p[k], sol.f_pp[k], leaf(), s).unwrap();
        worst = worst.max((lf - g(s)).abs());
    }
    assert!(worst <= 1e-6, "sup |L f - g| = {worst:e}");
    assert!(sol.max_residual <= 1e-6);
}

#[test]
fn perturbed_leaf_is_even_and_convex() {
    let pl = perturbed();
    assert_eq!(pl.s_grid()[0], 0.0);
    assert_eq!(pl.sigma_bar_p[0], 0.0);
    assert!(pl.min_convexity() > 0.0);
    let up = pl.upper(1e-4).unwrap();
    assert!(up.sigma_p.abs() < 1e-3);
}

#[test]
fn perturbed_leaf_tail() {
    let pl = perturbed();
    let k = pl.asymptotic_constant(10.0);
    assert!(k.is_finite(), "K = {k}");
    assert!(pl.a_bar > 0.0);
}

#[test]
fn curvature_margin_clears_half_epsilon() {
    let pl = perturbed();
    assert!(pl.eps0 >= 1e-4);
    assert!(pl.min_margin() >= pl.eps0 / 2.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn operator_is_linear(
        s in 0.05_f64..150.0,
        f in prop::array::uniform3(-10.0_f64..10.0),
        g in prop::array::uniform3(-10.0_f64..10.0),
        alpha in -3.0_f64..3.0,
        beta in -3.0_f64..3.0,
    ) {
        let combo: Vec<f64> = (0..3).map(|i| alpha * f[i] + beta * g[i]).collect();
        let lhs = linearized_apply(combo[0], combo[1], combo[2], leaf(), s).unwrap();
        let lf = linearized_apply(f[0], f[1], f[2], leaf(), s).unwrap();
        let lg = linearized_apply(g[0], g[1], g[2], leaf(), s).unwrap();
        let scale = 1.0 + (alpha * lf).abs() + (beta * lg).abs();
        prop_assert!((lhs - alpha * lf - beta * lg).abs() <= 1e-12 * scale);
    }
}
