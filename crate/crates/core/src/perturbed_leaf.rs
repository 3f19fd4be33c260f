//! Perturbation `sigma_bar = sigma + eps0 f` of the leaf whose mean curvature
//! has a strict sign, obtained by solving the linearized equation `L f = g`
//! with `g = sigma^{-9/2}`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, IntegrationState, Result};
use crate::foliation::{curvature_functional, Derivs, LeafProfile, Profile};
use crate::numerics::interp::QuinticHermite;
use crate::numerics::quad::GaussLegendre;

const EPS_START: f64 = 0.1;
const EPS_HALVINGS: usize = 20;
const EPS_FLOOR: f64 = 1e-6;

/// `(log p)'` and `q` for the profile at `s > 0`.
fn coefficients(d: &Derivs, s: f64) -> (f64, f64) {
    let w = 1.0 + d.sigma_p * d.sigma_p;
    let log_p = 3.0 / s + 3.0 * d.sigma_p / d.sigma - 3.0 * d.sigma_p * d.sigma_pp / w;
    let q = 3.0 * w / (d.sigma * d.sigma);
    (log_p, q)
}

/// `p = s^3 sigma^3 (1 + sigma'^2)^{-3/2}`.
fn weight(d: &Derivs, s: f64) -> f64 {
    (s * d.sigma).powi(3) * (1.0 + d.sigma_p * d.sigma_p).powf(-1.5)
}

/// `L f = f'' + (log p)' f' + q f` at `s > 0`.
pub fn linearized_apply<P: Profile + ?Sized>(f: f64, f_p: f64, f_pp: f64, profile: &P, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("linearized operator needs s > 0, got {s}")));
    }
    let d = profile.derivs(s)?;
    let (log_p, q) = coefficients(&d, s);
    Ok(f_pp + log_p * f_p + q * f)
}

/// The Jacobi field `f0 = sigma - s sigma'` generated by dilations.
pub fn jacobi_field_f0(profile: &LeafProfile) -> Vec<f64> {
    let (dev, dev_p) = profile.deviations();
    profile.s_grid.iter().enumerate().map(|(i, &s)| dev[i] - s * dev_p[i]).collect()
}

/// `(f0, f0', f0'')` at `s`.
pub fn jacobi_field_derivs(profile: &LeafProfile, s: f64) -> Result<[f64; 3]> {
    let d = profile.eval(s)?;
    let ppp = profile.sigma_ppp(s)?;
    let (f0, f0_p) = profile.dilation_field(s)?;
    Ok([f0, f0_p, -d.sigma_pp - s * ppp])
}

/// Solution of `L f = g` with `f(0) = f'(0) = 0`, sampled on the leaf grid.
#[derive(Debug, Clone, Serialize)]
pub struct LinearizedSolution {
    pub s: Vec<f64>,
    pub f: Vec<f64>,
    pub f_p: Vec<f64>,
    pub f_pp: Vec<f64>,
    /// Largest `|L f - g| / (1 + |g|)` over positive sample radii.
    pub max_residual: f64,
    /// Tail fit `f ≈ c s^{-2} + d s^{-5/2} + e s^{-3}`.
    pub tail: [f64; 3],
}

impl LinearizedSolution {
    /// `f` and its derivatives at any `s >= 0`, continued past the grid
    /// with the tail fit.
    fn eval(&self, interp: &QuinticHermite, s: f64) -> [f64; 3] {
        if let Some(v) = interp.eval(s) {
            return v;
        }
        let [c, d, e] = self.tail;
        [
            c * s.powi(-2) + d * s.powf(-2.5) + e * s.powi(-3),
            -2.0 * c * s.powi(-3) - 2.5 * d * s.powf(-3.5) - 3.0 * e * s.powi(-4),
            6.0 * c * s.powi(-4) + 8.75 * d * s.powf(-4.5) + 12.0 * e * s.powi(-5),
        ]
    }

    /// `max |f - c s^{-2}| s^{5/2}` over samples in `[s_lo, s_max]`.
    pub fn tail_constant(&self, s_lo: f64) -> f64 {
        let c = self.tail[0];
        self.s
            .iter()
            .zip(&self.f)
            .filter(|(s, _)| **s >= s_lo)
            .map(|(&s, &f)| (f - c / (s * s)).abs() * s.powf(2.5))
            .fold(0.0, f64::max)
    }

    fn interpolant(&self) -> QuinticHermite {
        QuinticHermite::new(self.s.clone(), self.f.clone(), self.f_p.clone(), self.f_pp.clone())
    }
}

struct Integrator<'a, G> {
    profile: &'a LeafProfile,
    g: G,
    gl: GaussLegendre,
}

impl<G: Fn(f64) -> f64> Integrator<'_, G> {
    /// `(f0, p)` at `s`, failing if the Jacobi field is not positive.
    fn f0_p(&self, s: f64) -> Result<(f64, f64)> {
        let d = self.profile.eval(s)?;
        let (f0, _) = self.profile.dilation_field(s)?;
        if !(f0 > 0.0) {
            return Err(Error::Integration {
                reason: "Jacobi field f0 = sigma - s sigma' is not positive".into(),
                state: IntegrationState { s, sigma: d.sigma, sigma_p: d.sigma_p, step: 0.0 },
            });
        }
        Ok((f0, weight(&d, s)))
    }

    fn inner(&self, a: f64, b: f64) -> Result<f64> {
        let mut err = None;
        let v = self.gl.integrate(a, b, |tau| match self.f0_p(tau) {
            Ok((f0, p)) => f0 * p * (self.g)(tau),
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        });
        err.map_or(Ok(v), Err)
    }

    /// Integrals `(I, J)` from `a` to `b` given their values `(i_a, j_a)` at `a`.
    fn advance(&self, a: f64, b: f64, i_a: f64, j_a: f64) -> Result<(f64, f64)> {
        let mut err = None;
        let dj = self.gl.integrate(a, b, |t| {
            let r = self.f0_p(t).and_then(|(f0, p)| Ok((i_a + self.inner(a, t)?) / (f0 * f0 * p)));
            r.unwrap_or_else(|e| {
                err.get_or_insert(e);
                0.0
            })
        });
        if let Some(e) = err {
            return Err(e);
        }
        Ok((i_a + self.inner(a, b)?, j_a + dj))
    }

    /// `f'` at `s` from the integrals at `s`.
    fn derivative(&self, s: f64, i: f64, j: f64) -> Result<f64> {
        let (_, f0_p) = self.profile.dilation_field(s)?;
        let (f0, p) = self.f0_p(s)?;
        Ok(f0_p * j + i / (f0 * p))
    }
}

/// Solves `L f = g` by the reduction-of-order formula
/// `f = f0 ∫_0^s f0^{-2} p^{-1} ∫_0^t f0 p g`.
pub fn solve_linearized<G: Fn(f64) -> f64>(g: G, profile: &LeafProfile) -> Result<LinearizedSolution> {
    let s = profile.s_grid.clone();
    let n = s.len();
    let it = Integrator { profile, g, gl: GaussLegendre::new(8) };

    let mut i_int = vec![0.0; n];
    let mut j_int = vec![0.0; n];
    for k in 1..n {
        let (i, j) = it.advance(s[k - 1], s[k], i_int[k - 1], j_int[k - 1])?;
        i_int[k] = i;
        j_int[k] = j;
    }

    let mut f = vec![0.0; n];
    let mut f_p = vec![0.0; n];
    let mut f_pp = vec![0.0; n];
    f_pp[0] = (it.g)(0.0) / 4.0;
    let cbrt_eps = f64::EPSILON.cbrt();
    for k in 1..n {
        let (f0, _) = it.f0_p(s[k])?;
        f[k] = f0 * j_int[k];
        f_p[k] = it.derivative(s[k], i_int[k], j_int[k])?;
        let delta = cbrt_eps * s[k].max(1e-2);
        let slope_at = |x: f64| -> Result<f64> {
            let (i, j) = it.advance(s[k], x, i_int[k], j_int[k])?;
            it.derivative(x, i, j)
        };
        f_pp[k] = if k + 1 < n {
            (slope_at(s[k] + delta)? - slope_at(s[k] - delta)?) / (2.0 * delta)
        } else {
            (3.0 * f_p[k] - 4.0 * slope_at(s[k] - delta)? + slope_at(s[k] - 2.0 * delta)?) / (2.0 * delta)
        };
    }

    let mut max_residual: f64 = 0.0;
    for k in 1..n {
        let gk = (it.g)(s[k]);
        let r = linearized_apply(f[k], f_p[k], f_pp[k], profile, s[k])? - gk;
        max_residual = max_residual.max(r.abs() / (1.0 + gk.abs()));
    }

    let tail = fit_tail(&s, &f)?;
    Ok(LinearizedSolution { s, f, f_p, f_pp, max_residual, tail })
}

/// Least squares for `f s^2 ≈ c + d s^{-1/2} + e s^{-1}` on the outer quarter-decade.
fn fit_tail(s: &[f64], f: &[f64]) -> Result<[f64; 3]> {
    let s_max = *s.last().unwrap();
    let rows: Vec<usize> = (0..s.len()).filter(|&k| s[k] >= s_max / 4.0).collect();
    if rows.len() < 6 {
        return Err(Error::Fit(format!("only {} samples for the tail fit", rows.len())));
    }
    let a = DMatrix::from_fn(rows.len(), 3, |r, c| s[rows[r]].powf(-0.5 * c as f64));
    let b = DVector::from_fn(rows.len(), |r, _| f[rows[r]] * s[rows[r]].powi(2));
    let x = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::Fit(format!("tail fit: {e}")))?;
    Ok([x[0], x[1], x[2]])
}

/// `min G(sigma + eps f) sigma^{9/2}` over the grid.
pub fn curvature_margin(profile: &LeafProfile, sol: &LinearizedSolution, eps: f64) -> f64 {
    (0..profile.len())
        .map(|k| {
            let d = Derivs {
                sigma: profile.sigma[k] + eps * sol.f[k],
                sigma_p: profile.sigma_p[k] + eps * sol.f_p[k],
                sigma_pp: profile.sigma_pp[k] + eps * sol.f_pp[k],
            };
            curvature_functional(&d, profile.s_grid[k]) * profile.sigma[k].powf(4.5)
        })
        .fold(f64::INFINITY, f64::min)
}

/// `max |G(sigma + eps f) - eps L f| sigma^7 / eps^2`, using `L f = sigma^{-9/2}`.
pub fn taylor_constant(profile: &LeafProfile, sol: &LinearizedSolution, eps: f64) -> f64 {
    (0..profile.len())
        .map(|k| {
            let s = profile.s_grid[k];
            let d = Derivs {
                sigma: profile.sigma[k] + eps * sol.f[k],
                sigma_p: profile.sigma_p[k] + eps * sol.f_p[k],
                sigma_pp: profile.sigma_pp[k] + eps * sol.f_pp[k],
            };
            let lin = eps * profile.sigma[k].powf(-4.5);
            (curvature_functional(&d, s) - lin).abs() * profile.sigma[k].powi(7) / (eps * eps)
        })
        .fold(0.0, f64::max)
}

/// Largest `eps = 0.1 / 2^k` with `G(sigma + eps f) sigma^{9/2} >= eps / 2` on the grid.
pub fn choose_epsilon0(profile: &LeafProfile, sol: &LinearizedSolution) -> Result<f64> {
    let mut eps = EPS_START;
    for _ in 0..=EPS_HALVINGS {
        if eps < EPS_FLOOR {
            break;
        }
        if curvature_margin(profile, sol, eps) >= eps / 2.0 {
            return Ok(eps);
        }
        eps /= 2.0;
    }
    Err(Error::Construction(format!("no eps0 >= {EPS_FLOOR:e} gives a signed mean curvature")))
}

/// The leaf `sigma_bar = sigma + eps0 f` with mean curvature at least
/// `eps0/2 sigma^{-9/2}`.
#[derive(Debug, Clone)]
pub struct PerturbedLeaf {
    pub base: LeafProfile,
    pub solution: LinearizedSolution,
    pub eps0: f64,
    pub sigma_bar: Vec<f64>,
    pub sigma_bar_p: Vec<f64>,
    pub sigma_bar_pp: Vec<f64>,
    /// `G(sigma_bar) sigma^{9/2}` per sample.
    pub margin: Vec<f64>,
    /// Coefficient of `s^{-2}` in `sigma_bar - s`.
    pub a_bar: f64,
    f_interp: QuinticHermite,
}

impl PerturbedLeaf {
    pub fn new(base: LeafProfile) -> Result<Self> {
        let solution = solve_linearized(|s| base.eval(s).map(|d| d.sigma.powf(-4.5)).unwrap_or(f64::NAN), &base)?;
        let eps0 = choose_epsilon0(&base, &solution)?;
        Self::with_epsilon(base, solution, eps0)
    }

    pub fn with_epsilon(base: LeafProfile, solution: LinearizedSolution, eps0: f64) -> Result<Self> {
        let n = base.len();
        let sigma_bar: Vec<f64> = (0..n).map(|k| base.sigma[k] + eps0 * solution.f[k]).collect();
        let sigma_bar_p: Vec<f64> = (0..n).map(|k| base.sigma_p[k] + eps0 * solution.f_p[k]).collect();
        let sigma_bar_pp: Vec<f64> = (0..n).map(|k| base.sigma_pp[k] + eps0 * solution.f_pp[k]).collect();
        let margin = (0..n)
            .map(|k| {
                let d = Derivs { sigma: sigma_bar[k], sigma_p: sigma_bar_p[k], sigma_pp: sigma_bar_pp[k] };
                curvature_functional(&d, base.s_grid[k]) * base.sigma[k].powf(4.5)
            })
            .collect();
        let a_bar = base.a + eps0 * solution.tail[0];
        let f_interp = solution.interpolant();
        Ok(PerturbedLeaf { base, solution, eps0, sigma_bar, sigma_bar_p, sigma_bar_pp, margin, a_bar, f_interp })
    }

    pub fn s_grid(&self) -> &[f64] {
        &self.base.s_grid
    }

    pub fn s_max(&self) -> f64 {
        self.base.s_max()
    }

    pub fn min_margin(&self) -> f64 {
        self.margin.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn min_convexity(&self) -> f64 {
        self.sigma_bar_pp.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `(f, f', f'')` at any `s >= 0`.
    pub fn perturbation(&self, s: f64) -> [f64; 3] {
        self.solution.eval(&self.f_interp, s)
    }

    /// `(sigma + sign eps0 f) - s` and derivatives at any `s >= 0`.
    fn shifted_deviation(&self, s: f64, sign: f64) -> Result<[f64; 3]> {
        if s < 0.0 {
            return Err(Error::Domain(format!("leaf evaluated at s = {s} < 0")));
        }
        let [d, dp, dpp] = self.base.eval_deviation_extended(s)?;
        let [f, fp, fpp] = self.perturbation(s);
        let e = sign * self.eps0;
        Ok([d + e * f, dp + e * fp, dpp + e * fpp])
    }

    /// `(sigma_bar - s, sigma_bar' - 1, sigma_bar'')`, continued asymptotically past `s_max`.
    pub fn upper_deviation(&self, s: f64) -> Result<[f64; 3]> {
        self.shifted_deviation(s, 1.0)
    }

    /// Deviation form of the lower leaf `2(sigma - eps0 f)(s/2)`.
    pub fn lower_deviation(&self, s: f64) -> Result<[f64; 3]> {
        let [d, dp, dpp] = self.shifted_deviation(0.5 * s, -1.0)?;
        Ok([2.0 * d, dp, 0.5 * dpp])
    }

    pub fn upper(&self, s: f64) -> Result<Derivs> {
        let [d, dp, dpp] = self.upper_deviation(s)?;
        Ok(Derivs { sigma: s + d, sigma_p: 1.0 + dp, sigma_pp: dpp })
    }

    pub fn lower(&self, s: f64) -> Result<Derivs> {
        let [d, dp, dpp] = self.lower_deviation(s)?;
        Ok(Derivs { sigma: s + d, sigma_p: 1.0 + dp, sigma_pp: dpp })
    }

    /// `max |sigma_bar - s - a_bar s^{-2}| s^{5/2}` over samples in `[s_lo, s_max]`.
    pub fn asymptotic_constant(&self, s_lo: f64) -> f64 {
        self.base
            .phase()
            .iter()
            .skip(1)
            .zip(self.base.s_grid.iter().skip(2).zip(self.solution.f.iter().skip(2)))
            .filter(|(_, (s, _))| **s >= s_lo)
            .map(|(st, (&s, &f))| (s * (st.x - 1.0) + self.eps0 * f - self.a_bar / (s * s)).abs() * s.powf(2.5))
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,f,sigma_bar,G_sigma_bar_margin\n");
        for k in 0..self.base.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.base.s_grid[k], self.solution.f[k], self.sigma_bar[k], self.margin[k]
            ));
        }
        out
    }
}

/// Upper leaf view usable wherever a [`Profile`] is expected.
pub struct UpperLeaf<'a>(pub &'a PerturbedLeaf);

/// Lower leaf view usable wherever a [`Profile`] is expected.
pub struct LowerLeaf<'a>(pub &'a PerturbedLeaf);

impl Profile for UpperLeaf<'_> {
    fn derivs(&self, s: f64) -> Result<Derivs> {
        self.0.upper(s)
    }
}

impl Profile for LowerLeaf<'_> {
    fn derivs(&self, s: f64) -> Result<Derivs> {
        self.0.lower(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::foliation::{integrate_leaf, ConeProfile};

    #[test]
    fn zero_input_gives_zero() {
        assert_eq!(linearized_apply(0.0, 0.0, 0.0, &ConeProfile, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn rejects_origin() {
        assert!(matches!(linearized_apply(1.0, 0.0, 0.0, &ConeProfile, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn cone_coefficients() {
        // On the cone (log p)' = 6/s and q = 6/s^2, so L s^2 = 2 + 12 + 6.
        let v = linearized_apply(4.0, 4.0, 2.0, &ConeProfile, 2.0).unwrap();
        assert!((v - 20.0).abs() < 1e-12);
    }

    #[test]
    fn zero_source_gives_zero_solution() {
        let leaf = integrate_leaf(20.0, 1e-9).unwrap();
        let sol = solve_linearized(|_| 0.0, &leaf).unwrap();
        assert!(sol.f.iter().all(|&v| v == 0.0));
    }
}
