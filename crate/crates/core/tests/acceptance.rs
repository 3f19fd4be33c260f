//! Acceptance run: one line per criterion, nonzero exit if any fails.

use std::f64::consts::{FRAC_PI_2, PI};
use std::process::ExitCode;
use std::time::Instant;

use bernstein_lab::barriers::{
    build_barriers, check_final_inequality, final_inequality_grids, sign_check_grid, sign_refinement, BarrierKind,
    BarrierSearch, BarrierSpec, ReducedPoint,
};
use bernstein_lab::cone_stability::{
    minimize_form, radial_jacobi_coefficient, simons_exponents, ConeSpec, DEFAULT_ANNULUS, DEFAULT_NODES,
};
use bernstein_lab::foliation::{boundary_polynomial, integrate_leaf, linear_analysis, verify_trapping_boundary_on};
use bernstein_lab::lagrangian::{
    known_witness, levelset_convexity_witness, rotate_eigenvalue, rotate_hessian, ConvexityOutcome, RotationAngle,
};
use bernstein_lab::lawson_osserman::{lawson_osserman_report, LoConeMap};
use bernstein_lab::mse_solver::{dirichlet_solve, growth_exponent, verify_trapping, SolverConfig, SymmetricGrid};
use bernstein_lab::mss2d::{
    expected_metric_density, generate_solution, jorgens_reduction, refinement_study, rotation_from_angle,
    HolomorphicPoly, MapGrid,
};
use bernstein_lab::perturbed_leaf::PerturbedLeaf;
use bernstein_lab::Result;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<(bool, String)>;

fn leaf_construction() -> Outcome {
    let start = Instant::now();
    let leaf = integrate_leaf(200.0, 1e-12)?;
    let secs = start.elapsed().as_secs_f64();

    // Even series sigma = 1 + c2 s^2: G = 0 at the origin reads 2c2 + 3(2c2 - 1) = 0.
    let c2 = 3.0 / 8.0;
    let pp_err = (leaf.sigma_pp[0] - 2.0 * c2).abs();

    let mut outside = 0;
    for p in leaf.phase() {
        if p.t.exp() >= 5.0 {
            let band = 1e-10;
            let inside = p.x >= 1.0 - band && p.y >= p.x.powf(-2.5) - band && p.y <= 1.0 / p.x + band;
            if !inside {
                outside += 1;
            }
        }
    }

    let mut k = 0.0_f64;
    for (s, sigma) in leaf.s_grid.iter().zip(&leaf.sigma) {
        if (10.0..=200.0).contains(s) {
            k = k.max((sigma - s - leaf.a / (s * s)).abs() * s.powi(3));
        }
    }
    let ok = secs < 10.0 && pp_err <= 1e-6 && outside == 0 && leaf.a > 0.0 && k.is_finite() && k < 10.0;
    Ok((ok, format!("time {secs:.2}s, |sigma''(0) - 3/4| = {pp_err:.1e}, exits {outside}, a = {:.6}, K = {k:.3e}", leaf.a)))
}

fn trapping_boundary() -> Outcome {
    // Exact integer arithmetic on P(z) = 6z^13 - 11z^10 + 11z^3 - 6.
    let p = boundary_polynomial();
    let coeffs: Vec<i128> = p.0.iter().map(|&c| c as i128).collect();
    let p1: i128 = coeffs.iter().sum();
    let dp1: i128 = coeffs.iter().enumerate().map(|(k, c)| k as i128 * c).sum();

    // Inward flux recomputed from the vector field (-x + y, 3(1 + y^2)(1/x - y)).
    let field = |x: f64, y: f64| (-x + y, 3.0 * (1.0 + y * y) * (1.0 / x - y));
    let n = 10_000;
    let (lo, hi) = (1.001_f64, 1e3_f64);
    let mut min_flux = f64::INFINITY;
    for k in 0..n {
        let x = (lo.ln() + (hi.ln() - lo.ln()) * k as f64 / (n - 1) as f64).exp();
        // Top curve y = 1/x, inward normal (-1/x^2, -1).
        let (vx, vy) = field(x, 1.0 / x);
        min_flux = min_flux.min(-vx / (x * x) - vy);
        // Bottom curve y = x^{-5/2}, inward normal (5/2 x^{-7/2}, 1).
        let (vx, vy) = field(x, x.powf(-2.5));
        min_flux = min_flux.min(2.5 * x.powf(-3.5) * vx + vy);
    }
    let lib = verify_trapping_boundary_on(n, lo, hi)?;
    let lib_min = lib.top_min_margin.min(lib.bottom_min_margin);
    let agree = (lib_min - min_flux).abs() <= 1e-12 * min_flux.abs().max(1.0);
    let ok = p1 == 0 && dp1 == 1 && lib.p_at_one == 0 && lib.p_prime_at_one == 1 && min_flux > 0.0 && agree;
    Ok((ok, format!("P(1) = {p1}, P'(1) = {dp1}, min flux {min_flux:.3e} (library {lib_min:.3e})")))
}

fn linearization() -> Outcome {
    let lin = linear_analysis();
    let m = lin.matrix;
    // Jacobian at (1, 1): [[-1, 1], [-6, -6]].
    let exact_m = [[-1.0, 1.0], [-6.0, -6.0]];
    let apply = |v: [f64; 2]| [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]];
    let pairs_exact = apply([1.0, -2.0]) == [-3.0, 6.0] && apply([1.0, -3.0]) == [-4.0, 12.0];
    let lib_pairs = lin.eigenpairs == [(-3.0, [1.0, -2.0]), (-4.0, [1.0, -3.0])];
    // -2 Me.e / |e|^2 with e = (1, -s): 2(1 - 5s + 6s^2)/(1 + s^2).
    let form = |s: f64| 2.0 * (1.0 - 5.0 * s + 6.0 * s * s) / (1.0 + s * s);
    let e1 = (lin.form_at_one - 2.0).abs().max((form(1.0) - 2.0).abs());
    let e2 = (lin.form_at_five_halves - 208.0 / 29.0).abs().max((form(2.5) - 208.0 / 29.0).abs());
    let ok = m == exact_m && pairs_exact && lib_pairs && e1 <= 1e-12 && e2 <= 1e-12;
    Ok((ok, format!("eigenpairs exact: {}, form errors {e1:.1e}, {e2:.1e}", pairs_exact && lib_pairs)))
}

fn perturbed_leaf() -> Result<(PerturbedLeaf, bool, String)> {
    let pl = PerturbedLeaf::new(integrate_leaf(200.0, 1e-12)?)?;
    let mut min_margin = f64::INFINITY;
    for k in 0..pl.s_grid().len() {
        let s = pl.s_grid()[k];
        if s > 50.0 {
            break;
        }
        let (g, gp, gpp) = (pl.sigma_bar[k], pl.sigma_bar_p[k], pl.sigma_bar_pp[k]);
        let ratio = if s == 0.0 { gpp } else { gp / s };
        let curvature = gpp + 3.0 * (1.0 + gp * gp) * (ratio - 1.0 / g);
        min_margin = min_margin.min(curvature * pl.base.sigma[k].powf(4.5));
    }
    let res = pl.solution.max_residual;
    let ok = pl.eps0 >= 1e-4 && min_margin >= pl.eps0 / 2.0 && res <= 1e-6;
    let detail = format!("eps0 = {:.3e}, min G sigma^9/2 on [0,50] = {min_margin:.4e}, residual {res:.2e}", pl.eps0);
    Ok((pl, ok, detail))
}

fn barriers(pl: PerturbedLeaf) -> Result<(BarrierSpec, bool, String)> {
    let search = BarrierSearch::default();
    let (spec, rep) = build_barriers(pl, &search)?;
    let (s_grid, t_grid) = final_inequality_grids();
    let (s_ok, t_ok) = (
        s_grid.len() == 200 && (s_grid[0] - 1e-3).abs() < 1e-15 && (s_grid[199] - 1e3).abs() < 1e-9,
        t_grid.len() == 50 && t_grid[0] == 1.0 && t_grid[49] == 100.0,
    );
    let margin = check_final_inequality(rep.a, &s_grid, &t_grid);
    let grid = sign_check_grid(search.check_radius, search.check_points);
    let sup = sign_refinement(&spec, BarrierKind::Supersolution, &grid, search.check_h)?;
    let sub = sign_refinement(&spec, BarrierKind::Subsolution, &grid, search.check_h)?;

    let mut unordered = 0;
    for p in &grid {
        let lower = spec.subsolution_value(*p)?;
        let upper = spec.supersolution_log_value(*p)?;
        let upper_value = upper.value();
        if lower > upper_value && !(upper_value.is_infinite()) {
            unordered += 1;
        }
    }
    let ok = s_ok && t_ok && margin >= rep.constants.c_req && sup.passed && sub.passed && unordered == 0;
    let detail = format!(
        "A = {}, margin {margin:.3e} vs C_req {:.3e}, violations super {:?} sub {:?}, consistency {:.2}/{:.2}, unordered {unordered}",
        rep.a,
        rep.constants.c_req,
        sup.max_violation,
        sub.max_violation,
        sup.consistency_ratio,
        sub.consistency_ratio
    );
    Ok((spec, ok, detail))
}

fn mse_solve(spec: &BarrierSpec) -> Outcome {
    let cfg = SolverConfig::default();
    let solve = |r: f64, cells: usize| -> Result<SymmetricGrid> {
        dirichlet_solve(r, r / cells as f64, |s, t| spec.subsolution_value(ReducedPoint { s, t }), &cfg)
    };
    let start = Instant::now();
    let sol = solve(8.0, 128)?;
    let secs = start.elapsed().as_secs_f64();
    let fine = solve(8.0, 256)?;
    let eps_h = sol.refinement_difference(&fine)?;
    let (v0, v1) = (verify_trapping(&sol, spec)?.max_violation(), verify_trapping(&fine, spec)?.max_violation());
    let maxima = [solve(4.0, 128)?.max_abs(), sol.max_abs(), solve(16.0, 128)?.max_abs()];
    let fit = growth_exponent(&[4.0, 8.0, 16.0], &maxima)?;
    // Independent slope through the end points.
    let slope = (maxima[2] / maxima[0]).ln() / 4.0_f64.ln();
    let ok = sol.residual <= 1e-8
        && sol.iterations <= 500
        && secs < 120.0
        && v0 <= eps_h
        && (v1 == 0.0 || 3.0 * v1 <= v0)
        && (2.5..=3.5).contains(&fit.exponent)
        && (fit.exponent - slope).abs() < 0.1;
    Ok((
        ok,
        format!(
            "residual {:.2e} after {} iterations ({secs:.1}s), violations {v0:.2e} -> {v1:.2e} (eps_h {eps_h:.2e}), growth {:.3}",
            sol.residual, sol.iterations, fit.exponent
        ),
    ))
}

fn simons() -> Outcome {
    let gamma = 1.9;
    let mut osc_ok = true;
    for n in 2..=7 {
        let p = n as f64 - 4.0;
        let predicted = p * p - 4.0 * gamma < 0.0;
        let flag = simons_exponents(n, gamma)?.oscillation;
        osc_ok &= flag == predicted && flag == (n <= 6);
    }
    let (a, b) = DEFAULT_ANNULUS;
    let f32_ = minimize_form(&ConeSpec::new(3, 2.0)?, a, b, DEFAULT_NODES)?;
    let f54 = minimize_form(&ConeSpec::new(5, 4.0)?, a, b, DEFAULT_NODES)?;
    let f76 = minimize_form(&ConeSpec::new(7, 6.0)?, a, b, DEFAULT_NODES)?;
    let form_ok =
        f32_.form_min < 0.0 && f54.form_min < 0.0 && f76.form_min >= -10.0 * f76.discretization_error;
    let c = ConeSpec::new(7, 6.0)?;
    let roots_ok = radial_jacobi_coefficient(&c, -2.0) == 0.0 && radial_jacobi_coefficient(&c, -3.0) == 0.0;
    Ok((
        osc_ok && form_ok && roots_ok,
        format!(
            "oscillation {osc_ok}, form min (3,2) {:.4} (5,4) {:.4} (7,6) {:.4} (eps_h {:.1e}), exact roots {roots_ok}",
            f32_.form_min, f54.form_min, f76.form_min, f76.discretization_error
        ),
    ))
}

fn lagrangian() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut ident, mut spectral) = (0.0_f64, 0.0_f64);
    for _ in 0..10_000 {
        let theta = rng.random_range(0.05..PI - 0.2);
        let angle = RotationAngle::new(theta)?;
        let admissible = |rng: &mut ChaCha8Rng| rng.random_range(theta - FRAC_PI_2 + 0.05..FRAC_PI_2 - 0.05).tan();
        let l = admissible(&mut rng);
        // tan(atan(l) - theta) from the subtraction formula.
        let direct = (l - theta.tan()) / (1.0 + l * theta.tan());
        let got = rotate_eigenvalue(l, angle)?;
        ident = ident.max((got.atan() - (l.atan() - theta)).abs());
        ident = ident.max((got - direct).abs() / direct.abs().max(1.0));

        let g = DMatrix::from_fn(4, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = g.qr().q();
        let lambdas: Vec<f64> = (0..4).map(|_| admissible(&mut rng)).collect();
        let m = &q * DMatrix::from_diagonal(&DVector::from_vec(lambdas.clone())) * q.transpose();
        let m = (&m + m.transpose()) * 0.5;
        let (s, c) = theta.sin_cos();
        let id = DMatrix::<f64>::identity(4, 4);
        let den = (&id * c + &m * s).lu().try_inverse().expect("graph condition holds");
        let oracle = (&id * (-s) + &m * c) * den;
        let rot = rotate_hessian(&m, angle)?;
        let mut want: Vec<f64> = SymmetricEigen::new((&oracle + oracle.transpose()) * 0.5).eigenvalues.iter().copied().collect();
        want.sort_by(|a, b| b.total_cmp(a));
        for (g, w) in rot.eigenvalues.iter().zip(&want) {
            spectral = spectral.max((g - w).abs() / w.abs().max(1.0));
        }
    }
    let at_half_pi = levelset_convexity_witness(3, FRAC_PI_2, 100_000, 1)?;
    let at_zero = levelset_convexity_witness(3, 0.0, 100_000, 1)?;
    let w = known_witness();
    let known = w.x[0] * w.z[0].powi(2) / (1.0 + w.x[0].powi(2)).powi(2)
        + w.x[1] * w.z[1].powi(2) / (1.0 + w.x[1].powi(2)).powi(2)
        + w.x[2] * w.z[2].powi(2) / (1.0 + w.x[2].powi(2)).powi(2);
    let none_below = at_half_pi.min_value() >= -1e-12 && matches!(at_half_pi, ConvexityOutcome::NoViolation { .. });
    let witness = matches!(at_zero, ConvexityOutcome::Witness { .. }) && at_zero.min_value() <= -0.5;
    let ok = ident <= 1e-10 && spectral <= 1e-10 && none_below && witness && known == -1.0 && w.value == -1.0;
    Ok((
        ok,
        format!(
            "identity {ident:.1e}, spectral {spectral:.1e}, min at pi/2 {:.2e}, witness at 0 {:.3}, seeded witness {}",
            at_half_pi.min_value(),
            at_zero.min_value(),
            w.value
        ),
    ))
}

fn mss2d() -> Outcome {
    let poly = HolomorphicPoly::new(vec![Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.25, 0.0)])?;
    let (lambda, rot) = (2.0, rotation_from_angle(0.3));
    let mut grids: Vec<MapGrid> = vec![];
    let mut quad = 0.0_f64;
    for nodes in [33, 65, 129, 257] {
        let s = generate_solution(&poly, lambda, rot, 2.0, nodes)?;
        quad = quad.max(s.quadratic_defect_relative);
        grids.push(s.grid);
    }
    let expected = expected_metric_density(lambda, &rot);
    let study = refinement_study(&grids, expected)?;
    let orders_ok = study.outer_orders.iter().chain(&study.inner_orders).all(|o| (o - 2.0).abs() <= 0.3);
    let c = study.density.iter().zip(&study.spacing).map(|(d, h)| d / (h * h)).fold(0.0, f64::max);
    let jor = jorgens_reduction(grids.last().unwrap(), 2.0 * grids[0].spacing(), 1e-6)?;
    let control = refinement_study(&grids.iter().map(|g| g.perturbed(1e-2)).collect::<Vec<_>>(), expected)?;
    let flagged = control.outer_orders.iter().all(|o| (o - 2.0).abs() > 0.3);
    let ok = quad <= 1e-10 && orders_ok && c <= 10.0 && jor.max_det_deviation <= 1e-6 && jor.positive && flagged;
    Ok((
        ok,
        format!(
            "quadratic {quad:.1e}, outer orders {:?}, inner orders {:?}, density/h^2 <= {c:.3}, det dev {:.1e}, control orders {:?}",
            rounded(&study.outer_orders),
            rounded(&study.inner_orders),
            jor.max_det_deviation,
            rounded(&control.outer_orders)
        ),
    ))
}

fn rounded(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1000.0).round() / 1000.0).collect()
}

fn lawson_osserman() -> Outcome {
    let rep = lawson_osserman_report(100, 1)?;
    let k = rep.k_star;
    let k_err = (k - 5.0_f64.sqrt() / 2.0).abs();
    let g = LoConeMap::new(k)?.metric([1.0, 0.0, 0.0, 0.0])?;
    let want = [1.0 + k * k, 1.0, 1.0 + 4.0 * k * k, 1.0 + 4.0 * k * k];
    let mut dev = 0.0_f64;
    for i in 0..4 {
        for j in 0..4 {
            let w = if i == j { want[i] } else { 0.0 };
            dev = dev.max((g[(i, j)] - w).abs());
        }
    }
    let ok = k_err <= 1e-10 && rep.max_residual <= 1e-6 && rep.n_samples == 100 && dev <= 4.0 * f64::EPSILON * 6.0;
    Ok((ok, format!("k* = {k:.15}, |k* - sqrt5/2| = {k_err:.1e}, max residual {:.2e}, metric dev {dev:.1e}", rep.max_residual)))
}

fn report(lines: &mut Vec<bool>, index: usize, name: &str, outcome: Outcome) {
    let (ok, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    println!("criterion {index:>2} {name:<20} {}  {detail}", if ok { "PASS" } else { "FAIL" });
    lines.push(ok);
}

fn main() -> ExitCode {
    let mut results = vec![];
    report(&mut results, 1, "leaf", leaf_construction());
    report(&mut results, 2, "trapping boundary", trapping_boundary());
    report(&mut results, 3, "linearization", linearization());
    let spec = match perturbed_leaf() {
        Ok((pl, ok, detail)) => {
            report(&mut results, 4, "perturbed leaf", Ok((ok, detail)));
            match barriers(pl) {
                Ok((spec, ok, detail)) => {
                    report(&mut results, 5, "barriers", Ok((ok, detail)));
                    Some(spec)
                }
                Err(e) => {
                    report(&mut results, 5, "barriers", Err(e));
                    None
                }
            }
        }
        Err(e) => {
            report(&mut results, 4, "perturbed leaf", Err(e));
            report(&mut results, 5, "barriers", Ok((false, "no perturbed leaf".into())));
            None
        }
    };
    match &spec {
        Some(spec) => report(&mut results, 6, "mse solve", mse_solve(spec)),
        None => report(&mut results, 6, "mse solve", Ok((false, "no barriers".into()))),
    }
    report(&mut results, 7, "simons", simons());
    report(&mut results, 8, "lagrangian", lagrangian());
    report(&mut results, 9, "mss2d", mss2d());
    report(&mut results, 10, "lawson-osserman", lawson_osserman());
    let passed = results.iter().filter(|r| **r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
