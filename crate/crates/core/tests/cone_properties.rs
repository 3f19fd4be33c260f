use bernstein_lab::cone_stability::{
    minimize_form, oscillating_test_function, radial_jacobi_coefficient, simons_exponents,
    simons_instability_certificate, stability_quadratic_form, weighted_norm_sq, ConeSpec, OscillatingFunction,
    RadialTestFunction, DEFAULT_ANNULUS, DEFAULT_NODES,
};
use proptest::prelude::*;
use std::f64::consts::PI;

/// Lowest Dirichlet mode of the Hardy operator on `[a, b]` and its derivative.
fn lowest_mode(n: usize, a: f64, b: f64, r: f64) -> (f64, f64) {
    let m = -(n as f64 - 2.0) / 2.0;
    let w = PI / (b / a).ln();
    let th = w * (r / a).ln();
    (r.powf(m) * th.sin(), r.powf(m - 1.0) * (m * th.sin() + w * th.cos()))
}

fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + h * k as f64);
    }
    acc * h / 3.0
}

#[test]
fn form_on_lowest_mode_matches_simpson_and_closed_form() {
    let (a, b) = DEFAULT_ANNULUS;
    for (n, kappa) in [(3, 2.0), (7, 6.0)] {
        let spec = ConeSpec::new(n, kappa).unwrap();
        let count = 2001;
        let r: Vec<f64> = (0..count).map(|i| a + (b - a) * i as f64 / (count - 1) as f64).collect();
        let mut values: Vec<f64> = r.iter().map(|&x| lowest_mode(n, a, b, x).0).collect();
        let slopes: Vec<f64> = r.iter().map(|&x| lowest_mode(n, a, b, x).1).collect();
        values[0] = 0.0;
        values[count - 1] = 0.0;
        let phi = RadialTestFunction::with_slopes(r, values, slopes).unwrap();
        let e = n as f64 - 1.0;
        let q_ref = simpson(a, b, 200_000, |x| {
            let (v, dv) = lowest_mode(n, a, b, x);
            (dv * dv - kappa * v * v / (x * x)) * x.powf(e)
        });
        let norm_ref = simpson(a, b, 200_000, |x| lowest_mode(n, a, b, x).0.powi(2) * x.powf(e - 2.0));
        let q = stability_quadratic_form(&spec, &phi);
        let norm = weighted_norm_sq(n, &phi);
        assert!((q - q_ref).abs() < 1e-7 * q_ref.abs().max(1.0), "({n}, {kappa}): {q} vs {q_ref}");
        assert!((norm - norm_ref).abs() < 1e-7 * norm_ref);
        let d = n as f64 - 2.0;
        let exact = d * d / 4.0 + (PI / (b / a).ln()).powi(2) - kappa;
        assert!((q_ref / norm_ref - exact).abs() < 1e-8);
    }
}

#[test]
fn hardy_comparison_predicts_sign() {
    let (a, b) = DEFAULT_ANNULUS;
    for (n, kappa) in [(3, 2.0), (4, 3.0), (5, 4.0), (6, 2.0), (7, 6.0), (8, 6.0), (9, 8.0)] {
        let spec = ConeSpec::new(n, kappa).unwrap();
        let fm = minimize_form(&spec, a, b, DEFAULT_NODES).unwrap();
        let hardy_stable = kappa <= spec.hardy_constant();
        assert_eq!(fm.form_min >= 0.0, hardy_stable, "({n}, {kappa}) form min {}", fm.form_min);
        assert!(fm.form_min.abs() >= 10.0 * fm.discretization_error);
    }
}

#[test]
fn symmetric_cone_in_eight_dimensions() {
    let spec = ConeSpec::symmetric(4).unwrap();
    assert_eq!((spec.n, spec.kappa), (7, 6.0));
    assert_eq!(radial_jacobi_coefficient(&spec, -2.0), 0.0);
    assert_eq!(radial_jacobi_coefficient(&spec, -3.0), 0.0);
    assert!(spec.kappa < spec.hardy_constant());
}

#[test]
fn oscillation_threshold() {
    for n in 2..=6 {
        assert!(simons_exponents(n, 1.9).unwrap().oscillation, "n = {n}");
    }
    assert!(!simons_exponents(7, 1.9).unwrap().oscillation);
    assert!(OscillatingFunction::new(7, 1.9, 1.0).is_err());
}

#[test]
fn certificate_margin_closed_form() {
    for (n, kappa) in [(3, 2.0), (5, 4.0), (4, 1.0)] {
        let c = simons_instability_certificate(&ConeSpec::new(n, kappa).unwrap(), 1.9).unwrap();
        let predicted = 1.9 + n as f64 - 3.0 - kappa;
        assert!((c.margin - predicted).abs() < 1e-6, "({n}, {kappa}): {} vs {predicted}", c.margin);
        assert_eq!(c.negative, predicted < 0.0);
    }
}

proptest! {
    #[test]
    fn oscillating_function_is_scale_covariant(n in 2_usize..7, gamma in 1.0_f64..2.0, a in 0.5_f64..2.0, lambda in 0.25_f64..4.0) {
        prop_assume!(((n as f64) - 4.0).powi(2) < 4.0 * gamma);
        let base = oscillating_test_function(n, gamma, a).unwrap();
        let scaled = oscillating_test_function(n, gamma, lambda * a).unwrap();
        let power = -(n as f64 - 4.0) / 2.0;
        let factor = lambda.powf(power);
        for i in (0..base.r.len()).step_by(16) {
            prop_assert!((scaled.r[i] - lambda * base.r[i]).abs() <= 1e-12 * scaled.r[i]);
            prop_assert!((scaled.values[i] - factor * base.values[i]).abs() <= 1e-10 * (1.0 + factor * base.values[i].abs()));
        }
    }

    #[test]
    fn radial_coefficient_vanishes_at_its_roots(n in 3_usize..12, kappa in 0.0_f64..5.0) {
        let spec = ConeSpec::new(n, kappa).unwrap();
        let p = n as f64 - 2.0;
        let disc = p * p - 4.0 * kappa;
        prop_assume!(disc >= 0.0);
        for alpha in [(-p + disc.sqrt()) / 2.0, (-p - disc.sqrt()) / 2.0] {
            prop_assert!(radial_jacobi_coefficient(&spec, alpha).abs() <= 1e-12 * (1.0 + p * p));
        }
    }
}
