//! Cubic-growth supersolution `u_bar = F(v)` and subsolution
//! `u_under = max(G(v_under) - D, 0)` of the minimal surface equation on
//! R^8 = R^4 x R^4, evaluated in the reduced plane `(s, t) = (|x|, |y|)`.
//!
//! `v` is the 3-homogeneous function whose 1-level set is the upper leaf
//! `t = sigma_bar(s)`; `v_under` is built the same way from the lower leaf.
//! For the constants used here `F'` is far outside the range of `f64`, so
//! the supersolution profile is carried in log space.

use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::foliation::Derivs;
use crate::numerics::quad::GaussLegendre;
use crate::numerics::roots::brent;
use crate::perturbed_leaf::PerturbedLeaf;

/// Level-set points with parameter beyond this multiple of the leaf range are refused.
pub const EXTRAPOLATION_FACTOR: f64 = 100.0;

fn gl16() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(16))
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Point of the reduced plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReducedPoint {
    pub s: f64,
    pub t: f64,
}

impl ReducedPoint {
    pub fn new(s: f64, t: f64) -> Result<Self> {
        if !(s >= 0.0 && t >= 0.0) {
            return Err(Error::Domain(format!("reduced point needs s, t >= 0, got ({s}, {t})")));
        }
        Ok(ReducedPoint { s, t })
    }
}

/// `∫_s^∞ τ^{-11/12} / (1 + τ^{1/6}) dτ = 12 arctan(s^{-1/12})`.
pub fn supersolution_exponent(s: f64) -> f64 {
    12.0 * s.powf(-1.0 / 12.0).atan()
}

/// `∫_s^∞ τ^{-2/3} / (1 + τ^{2/3}) dτ = 3 arctan(s^{-1/3})`.
pub fn subsolution_exponent(s: f64) -> f64 {
    3.0 * s.powf(-1.0 / 3.0).atan()
}

/// Supersolution profile `F' = A s^{-5/6} + exp(A^2 ∫_s^∞ ...)`, `F(0) = 0`, `F` odd.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuperProfile {
    pub a: f64,
}

impl SuperProfile {
    /// `log F'(|s|)`.
    pub fn log_derivative(&self, s: f64) -> f64 {
        let s = s.abs();
        log_add_exp(self.a.ln() - 5.0 / 6.0 * s.ln(), self.a * self.a * supersolution_exponent(s))
    }

    /// `F''/F'` for `s > 0`.
    pub fn second_over_first(&self, s: f64) -> f64 {
        let lf = self.log_derivative(s);
        let w_power = (self.a.ln() - 5.0 / 6.0 * s.ln() - lf).exp();
        let w_exp = (self.a * self.a * supersolution_exponent(s) - lf).exp();
        -(w_power * 5.0 / (6.0 * s) + w_exp * self.a * self.a * s.powf(-11.0 / 12.0) / (1.0 + s.powf(1.0 / 6.0)))
    }

    /// `log F(v)` for `v > 0`.
    pub fn log_value(&self, v: f64) -> f64 {
        assert!(v > 0.0);
        let a2 = self.a * self.a;
        // ∫_0^v e^{A^2 E} = e^{6πA^2} ∫_0^{v^{1/12}} 12u^11 e^{-12A^2 arctan u} du.
        let top = v.powf(1.0 / 12.0);
        let mut acc = 0.0;
        let mut hi = top;
        for _ in 0..60 {
            let lo = 0.5 * hi;
            acc += gl16().integrate(lo, hi, |u| 12.0 * u.powi(11) * (-12.0 * a2 * u.atan()).exp());
            hi = lo;
        }
        acc += gl16().integrate(0.0, hi, |u| 12.0 * u.powi(11) * (-12.0 * a2 * u.atan()).exp());
        log_add_exp((6.0 * self.a).ln() + v.ln() / 6.0, 6.0 * std::f64::consts::PI * a2 + acc.ln())
    }

    /// `(F, F', F'')` in plain floating point; entries overflow to infinity
    /// for large `A`.
    pub fn eval(&self, s: f64) -> (f64, f64, f64) {
        if s == 0.0 {
            return (0.0, f64::INFINITY, f64::NAN);
        }
        let sign = s.signum();
        let fp = self.log_derivative(s).exp();
        let value = sign * self.log_value(s.abs()).exp();
        let fpp = sign * fp * self.second_over_first(s.abs());
        (value, fp, fpp)
    }
}

/// `(F(s), F'(s), F''(s))`.
pub fn f_profile(s: f64, a: f64) -> (f64, f64, f64) {
    SuperProfile { a }.eval(s)
}

/// Subsolution profile `G' = exp(-B ∫_s^∞ ...)`, `G(0) = 0`, `G` odd.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubProfile {
    pub b: f64,
}

impl SubProfile {
    pub fn derivative(&self, s: f64) -> f64 {
        (-self.b * subsolution_exponent(s.abs())).exp()
    }

    /// `G''/G'` for `s > 0`.
    pub fn second_over_first(&self, s: f64) -> f64 {
        self.b * s.powf(-2.0 / 3.0) / (1.0 + s.powf(2.0 / 3.0))
    }

    pub fn value(&self, v: f64) -> f64 {
        let top = v.abs().cbrt();
        let pieces = (2.0 * top).ceil().max(4.0) as usize;
        let b = self.b;
        let g = gl16().integrate_composite(0.0, top, pieces, |u| 3.0 * u * u * (-3.0 * b * (1.0 / u).atan()).exp());
        v.signum() * g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// The leaf `sigma + eps0 f`.
    Upper,
    /// The leaf `2(sigma - eps0 f)(s/2)`.
    Lower,
}

/// Solution of `(s, t) = lambda (x, leaf(x))` together with the leaf data at `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelPoint {
    pub lambda: f64,
    pub x: f64,
    pub leaf: Derivs,
    /// `leaf - x leaf'`, positive along a convex leaf.
    pub f0: f64,
}

/// `G` of a leaf from its deviation form `(leaf - x, leaf' - 1, leaf'')`.
fn curvature_from_deviation(x: f64, dev: [f64; 3]) -> f64 {
    let [d, dp, dpp] = dev;
    let sigma = x + d;
    let sigma_p = 1.0 + dp;
    if x == 0.0 {
        return dpp + 3.0 * (1.0 + sigma_p * sigma_p) * (dpp - 1.0 / sigma);
    }
    // sigma'/x - 1/sigma = (d + dp x + dp d) / (x sigma)
    dpp + 3.0 * (1.0 + sigma_p * sigma_p) * (d + dp * x + dp * d) / (x * sigma)
}

/// The degree-3 homogeneous function with a prescribed leaf as 1-level set.
#[derive(Debug, Clone, Copy)]
pub struct LevelSet<'a> {
    pub leaf: &'a PerturbedLeaf,
    pub side: Side,
}

impl<'a> LevelSet<'a> {
    pub fn new(leaf: &'a PerturbedLeaf, side: Side) -> Self {
        LevelSet { leaf, side }
    }

    pub fn deviation(&self, x: f64) -> Result<[f64; 3]> {
        match self.side {
            Side::Upper => self.leaf.upper_deviation(x),
            Side::Lower => self.leaf.lower_deviation(x),
        }
    }

    pub fn x_limit(&self) -> f64 {
        EXTRAPOLATION_FACTOR * self.leaf.s_max()
    }

    fn at(&self, lambda: f64, x: f64) -> Result<LevelPoint> {
        let dev = self.deviation(x)?;
        let leaf = Derivs { sigma: x + dev[0], sigma_p: 1.0 + dev[1], sigma_pp: dev[2] };
        Ok(LevelPoint { lambda, x, leaf, f0: dev[0] - x * dev[1] })
    }

    /// Scale and parameter of the level set through `(s, t)`, `t > s >= 0`.
    pub fn locate(&self, s: f64, t: f64) -> Result<LevelPoint> {
        if !(t > s && s >= 0.0) {
            return Err(Error::Domain(format!("level set located only for t > s >= 0, got ({s}, {t})")));
        }
        let sigma0 = self.deviation(0.0)?[0];
        let hi = t / sigma0;
        if s == 0.0 {
            return self.at(hi, 0.0);
        }
        let gap = t - s;
        let mut failure = None;
        let mut phi = |lambda: f64| match self.deviation(s / lambda) {
            Ok(d) => lambda * d[0] - gap,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        };
        let mut lo = 0.5 * hi;
        loop {
            if s / lo > self.x_limit() {
                return Err(Error::Range(format!(
                    "point ({s}, {t}) needs leaf parameter beyond {:.3e}",
                    self.x_limit()
                )));
            }
            let v = phi(lo);
            if v.is_nan() {
                break;
            }
            if v < 0.0 {
                break;
            }
            lo *= 0.5;
        }
        let root = brent(&mut phi, lo, hi, 1e-15 * hi, 200);
        if let Some(e) = failure {
            return Err(e);
        }
        let lambda = root.ok_or_else(|| Error::Range(format!("no level-set bracket for ({s}, {t})")))?;
        self.at(lambda, s / lambda)
    }

    /// `v(s, t)`, odd across the diagonal.
    pub fn value(&self, p: ReducedPoint) -> Result<f64> {
        if p.t == p.s {
            return Ok(0.0);
        }
        if p.t < p.s {
            return Ok(-self.value(ReducedPoint { s: p.t, t: p.s })?);
        }
        Ok(self.locate(p.s, p.t)?.lambda.powi(3))
    }

    /// `(v, v_s, v_t)` for `t > s`.
    pub fn gradient(&self, s: f64, t: f64) -> Result<[f64; 3]> {
        let lp = self.locate(s, t)?;
        let l2 = lp.lambda * lp.lambda;
        Ok([l2 * lp.lambda, -3.0 * l2 * lp.leaf.sigma_p / lp.f0, 3.0 * l2 / lp.f0])
    }

    /// `[[v_ss, v_st], [v_st, v_tt]]` for `t > s`.
    pub fn hessian(&self, s: f64, t: f64) -> Result<[[f64; 2]; 2]> {
        let lp = self.locate(s, t)?;
        Ok(Self::hessian_at(&lp))
    }

    fn hessian_at(lp: &LevelPoint) -> [[f64; 2]; 2] {
        let l = lp.lambda;
        let (sig, sp, spp, x, f0) = (lp.leaf.sigma, lp.leaf.sigma_p, lp.leaf.sigma_pp, lp.x, lp.f0);
        let phi = -sp / f0;
        let psi = 1.0 / f0;
        let f03 = f0 * f0 * f0;
        let ss = 6.0 * l * phi * phi - 3.0 * l * spp * sig * sig / f03;
        let st = 6.0 * l * phi * psi + 3.0 * l * spp * sig * x / f03;
        let tt = 6.0 * l * psi * psi - 3.0 * l * x * x * spp / f03;
        [[ss, st], [st, tt]]
    }

    /// Largest absolute eigenvalue of the Hessian of `v` on R^8 at `(s, t)`.
    fn hessian_norm_at(lp: &LevelPoint, s: f64, t: f64) -> f64 {
        let h = Self::hessian_at(lp);
        let l2 = lp.lambda * lp.lambda;
        let vs = -3.0 * l2 * lp.leaf.sigma_p / lp.f0;
        let vt = 3.0 * l2 / lp.f0;
        let mean = 0.5 * (h[0][0] + h[1][1]);
        let rad = (0.25 * (h[0][0] - h[1][1]).powi(2) + h[0][1] * h[0][1]).sqrt();
        let mut m = (mean + rad).abs().max((mean - rad).abs()).max((vt / t).abs());
        // v_s/s has a finite limit on the axis s = 0.
        let radial = if s > 0.0 {
            vs / s
        } else {
            -3.0 * lp.lambda * lp.leaf.sigma_pp / lp.f0
        };
        m = m.max(radial.abs());
        m
    }

    /// Mean curvature of the level set through the located point,
    /// `lambda^{-1} (1 + leaf'^2)^{-3/2} G(leaf)(x)`.
    pub fn level_curvature(&self, lp: &LevelPoint) -> Result<f64> {
        let dev = self.deviation(lp.x)?;
        let w = 1.0 + lp.leaf.sigma_p * lp.leaf.sigma_p;
        Ok(curvature_from_deviation(lp.x, dev) / (lp.lambda * w.powf(1.5)))
    }
}

/// Constants of the gradient and Hessian estimates of `v` on its 1-level set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FunctionConstants {
    /// `max |D^2 v| / sigma^{7/2}`.
    pub hessian_max: f64,
    /// `min |∇v| / sigma^2`.
    pub gradient_min: f64,
    /// `max |∇v| / sigma^2`.
    pub gradient_max: f64,
    /// `min H sigma^{9/2}` for the mean curvature `H` of the level set.
    pub curvature_min: f64,
    /// Safety factor 2 times the constant that the final inequality must clear.
    pub c_req: f64,
    pub samples: usize,
}

/// Measures the constants of the 1-level set of `v` along the sampled leaf.
pub fn measure_function_constants(leaf: &PerturbedLeaf) -> Result<FunctionConstants> {
    let ls = LevelSet::new(leaf, Side::Upper);
    let mut c = FunctionConstants {
        hessian_max: 0.0,
        gradient_min: f64::INFINITY,
        gradient_max: 0.0,
        curvature_min: f64::INFINITY,
        c_req: 0.0,
        samples: 0,
    };
    for (k, &x) in leaf.s_grid().iter().enumerate() {
        let lp = ls.at(1.0, x)?;
        let sigma = leaf.base.sigma[k];
        let (s, t) = (x, lp.leaf.sigma);
        let grad = 3.0 * (1.0 + lp.leaf.sigma_p * lp.leaf.sigma_p).sqrt() / lp.f0;
        c.gradient_min = c.gradient_min.min(grad / (sigma * sigma));
        c.gradient_max = c.gradient_max.max(grad / (sigma * sigma));
        c.hessian_max = c.hessian_max.max(LevelSet::hessian_norm_at(&lp, s, t) / sigma.powf(3.5));
        c.curvature_min = c.curvature_min.min(ls.level_curvature(&lp)? * sigma.powf(4.5));
        c.samples += 1;
    }
    if !(c.curvature_min > 0.0) {
        return Err(Error::Construction(format!(
            "level-set mean curvature is not positive (min H sigma^9/2 = {:e})",
            c.curvature_min
        )));
    }
    let g = c.gradient_min;
    c.c_req = 2.0 * c.hessian_max / (c.curvature_min * g * g * g).min(g * g);
    Ok(c)
}

/// `F'^2(s) s^{4/3} t^{-4} - s (F''/F')(s) t`, saturated at `f64::MAX`.
pub fn final_inequality_value(profile: &SuperProfile, s: f64, t: f64) -> f64 {
    let log_first = 2.0 * profile.log_derivative(s) + 4.0 / 3.0 * s.ln() - 4.0 * t.ln();
    let second = -s * profile.second_over_first(s) * t;
    if log_first > f64::MAX.ln() {
        return f64::MAX;
    }
    (log_first.exp() + second).min(f64::MAX)
}

/// Minimum of [`final_inequality_value`] over the tensor grid.
pub fn check_final_inequality(a: f64, s_grid: &[f64], t_grid: &[f64]) -> f64 {
    let profile = SuperProfile { a };
    let mut m = f64::INFINITY;
    for &s in s_grid {
        for &t in t_grid {
            m = m.min(final_inequality_value(&profile, s, t));
        }
    }
    m
}

/// Log-spaced grid of `n` points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (l0, l1) = (lo.ln(), hi.ln());
    (0..n).map(|k| (l0 + (l1 - l0) * k as f64 / (n - 1).max(1) as f64).exp()).collect()
}

/// Uniform grid of `n` points on `[lo, hi]`.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1).max(1) as f64).collect()
}

/// The `s` and `t` grids of the final inequality check.
pub fn final_inequality_grids() -> (Vec<f64>, Vec<f64>) {
    (log_grid(1e-3, 1e3, 200), linear_grid(1.0, 100.0, 50))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BarrierKind {
    Supersolution,
    Subsolution,
}

/// Constants and leaves defining both barriers.
#[derive(Debug, Clone)]
pub struct BarrierSpec {
    pub eps0: f64,
    pub a: f64,
    pub b: f64,
    pub d: f64,
    pub leaf: PerturbedLeaf,
}

/// Log of a barrier value: `(sign, log|u|)` with `log|u| = -inf` for zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogValue {
    pub sign: f64,
    pub log_abs: f64,
}

impl LogValue {
    pub fn zero() -> Self {
        LogValue { sign: 0.0, log_abs: f64::NEG_INFINITY }
    }

    pub fn from_value(u: f64) -> Self {
        if u == 0.0 {
            Self::zero()
        } else {
            LogValue { sign: u.signum(), log_abs: u.abs().ln() }
        }
    }

    pub fn value(&self) -> f64 {
        if self.sign == 0.0 {
            0.0
        } else {
            self.sign * self.log_abs.exp()
        }
    }

    /// `self <= other`.
    pub fn le(&self, other: &LogValue) -> bool {
        match (self.sign, other.sign) {
            (a, b) if a < b => true,
            (a, b) if a > b => false,
            (s, _) if s > 0.0 => self.log_abs <= other.log_abs,
            (s, _) if s < 0.0 => self.log_abs >= other.log_abs,
            _ => true,
        }
    }
}

impl BarrierSpec {
    pub fn new(leaf: PerturbedLeaf, a: f64, b: f64, d: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && d >= 0.0) {
            return Err(Error::Domain(format!("need A, B > 0 and D >= 0, got ({a}, {b}, {d})")));
        }
        Ok(BarrierSpec { eps0: leaf.eps0, a, b, d, leaf })
    }

    pub fn upper_level(&self) -> LevelSet<'_> {
        LevelSet::new(&self.leaf, Side::Upper)
    }

    pub fn lower_level(&self) -> LevelSet<'_> {
        LevelSet::new(&self.leaf, Side::Lower)
    }

    pub fn super_profile(&self) -> SuperProfile {
        SuperProfile { a: self.a }
    }

    pub fn sub_profile(&self) -> SubProfile {
        SubProfile { b: self.b }
    }

    /// `u_bar = F(v)` in log form.
    pub fn supersolution_log_value(&self, p: ReducedPoint) -> Result<LogValue> {
        let v = self.upper_level().value(p)?;
        if v == 0.0 {
            return Ok(LogValue::zero());
        }
        Ok(LogValue { sign: v.signum(), log_abs: self.super_profile().log_value(v.abs()) })
    }

    /// `u_bar = F(v)`; infinite when `F(v)` exceeds the `f64` range.
    pub fn supersolution_value(&self, p: ReducedPoint) -> Result<f64> {
        Ok(self.supersolution_log_value(p)?.value())
    }

    /// `u_under = max(G(v_under) - D, 0)` above the diagonal, odd below.
    pub fn subsolution_value(&self, p: ReducedPoint) -> Result<f64> {
        if p.t < p.s {
            return Ok(-self.subsolution_value(ReducedPoint { s: p.t, t: p.s })?);
        }
        let v = self.lower_level().value(p)?;
        Ok((self.sub_profile().value(v) - self.d).max(0.0))
    }

    /// Flux `s^3 t^3 ∇v / sqrt(P'(v)^{-2} + |∇v|^2)` of the barrier profile `P`.
    fn flux(&self, kind: BarrierKind, s: f64, t: f64) -> Result<[f64; 2]> {
        let (level, inv_sq) = match kind {
            BarrierKind::Supersolution => {
                let [v, vs, vt] = self.upper_level().gradient(s, t)?;
                ((vs, vt), (-2.0 * self.super_profile().log_derivative(v)).exp())
            }
            BarrierKind::Subsolution => {
                let [v, vs, vt] = self.lower_level().gradient(s, t)?;
                let gp = self.sub_profile().derivative(v);
                ((vs, vt), 1.0 / (gp * gp))
            }
        };
        let (vs, vt) = level;
        let w = (inv_sq + vs * vs + vt * vt).sqrt();
        let weight = (s * t).powi(3);
        Ok([weight * vs / w, weight * vt / w])
    }

    /// Reduced minimal surface operator of the barrier at `(s, t)` by centered
    /// differences of the flux with step `h`, divided by `s^3 t^3`.
    pub fn reduced_operator(&self, kind: BarrierKind, s: f64, t: f64, h: f64) -> Result<f64> {
        let half = 0.5 * h;
        if !(s - half > 0.0 && t - half > s + half) {
            return Err(Error::Domain(format!("stencil at ({s}, {t}) with h = {h} touches the diagonal or an axis")));
        }
        let east = self.flux(kind, s + half, t)?[0];
        let west = self.flux(kind, s - half, t)?[0];
        let north = self.flux(kind, s, t + half)?[1];
        let south = self.flux(kind, s, t - half)?[1];
        Ok((east - west + north - south) / (h * (s * t).powi(3)))
    }
}

/// Outcome of the finite-difference sign check on one barrier.
#[derive(Debug, Clone, Serialize)]
pub struct SignReport {
    pub kind: BarrierKind,
    pub h: f64,
    pub points: usize,
    /// Largest wrong-signed part of the normalized operator.
    pub max_violation: f64,
    /// Largest absolute value of the normalized operator.
    pub max_abs_operator: f64,
    /// Operator value at each grid point, in grid order.
    pub values: Vec<f64>,
}

/// Evaluates the reduced operator on `grid` and reports its wrong-signed part.
pub fn verify_mean_curvature_sign(
    spec: &BarrierSpec,
    kind: BarrierKind,
    grid: &[ReducedPoint],
    h: f64,
) -> Result<SignReport> {
    let mut report = SignReport { kind, h, points: 0, max_violation: 0.0, max_abs_operator: 0.0, values: vec![] };
    for p in grid {
        if kind == BarrierKind::Subsolution && spec.d > 0.0 {
            // Only where the max is attained by G(v_under) - D on the whole stencil.
            let lowest = spec.subsolution_value(ReducedPoint { s: p.s + h, t: p.t - h })?;
            if lowest <= 0.0 {
                report.values.push(0.0);
                continue;
            }
        }
        let op = spec.reduced_operator(kind, p.s, p.t, h)?;
        let wrong = match kind {
            BarrierKind::Supersolution => op.max(0.0),
            BarrierKind::Subsolution => (-op).max(0.0),
        };
        report.max_violation = report.max_violation.max(wrong);
        report.max_abs_operator = report.max_abs_operator.max(op.abs());
        report.values.push(op);
        report.points += 1;
    }
    Ok(report)
}

/// Sign check repeated at `h`, `h/2`, `h/4`.
#[derive(Debug, Clone, Serialize)]
pub struct SignRefinement {
    pub kind: BarrierKind,
    pub steps: [f64; 3],
    pub max_violation: [f64; 3],
    /// `max |op_h - op_{h/2}| / max |op_{h/2} - op_{h/4}|`, about 4 for a
    /// second-order stencil.
    pub consistency_ratio: f64,
    /// Violations drop by at least 3 per halving (or stay at zero) and the
    /// consistency ratio is at least 3.
    pub passed: bool,
}

pub fn sign_refinement(spec: &BarrierSpec, kind: BarrierKind, grid: &[ReducedPoint], h: f64) -> Result<SignRefinement> {
    let steps = [h, h / 2.0, h / 4.0];
    let mut reports = Vec::with_capacity(3);
    for &step in &steps {
        reports.push(verify_mean_curvature_sign(spec, kind, grid, step)?);
    }
    let diff = |a: &SignReport, b: &SignReport| {
        a.values.iter().zip(&b.values).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
    };
    let coarse = diff(&reports[0], &reports[1]);
    let fine = diff(&reports[1], &reports[2]);
    let consistency_ratio = if fine > 0.0 { coarse / fine } else if coarse == 0.0 { f64::INFINITY } else { 0.0 };
    let max_violation = [reports[0].max_violation, reports[1].max_violation, reports[2].max_violation];
    let shrinks = max_violation.windows(2).all(|w| w[1] == 0.0 || w[1] * 3.0 <= w[0]);
    Ok(SignRefinement { kind, steps, max_violation, consistency_ratio, passed: shrinks && consistency_ratio >= 3.0 })
}

/// Interior grid of `{t > s}` in the square `[0, r]^2`, spacing `r/n`, kept a
/// spacing away from the axes and the diagonal.
pub fn sign_check_grid(r: f64, n: usize) -> Vec<ReducedPoint> {
    let h = r / n as f64;
    let mut out = vec![];
    for i in 1..n {
        for j in (i + 1)..n {
            out.push(ReducedPoint { s: i as f64 * h, t: j as f64 * h });
        }
    }
    out
}

/// Smallest `u_bar - u_under` comparison over the grid: the number of points
/// where `u_under > u_bar`.
pub fn ordering_violations(spec: &BarrierSpec, grid: &[ReducedPoint]) -> Result<usize> {
    let mut bad = 0;
    for p in grid {
        let upper = spec.supersolution_log_value(*p)?;
        let lower = LogValue::from_value(spec.subsolution_value(*p)?);
        if !lower.le(&upper) {
            bad += 1;
        }
    }
    Ok(bad)
}

/// Whether the lower leaf lies strictly above the upper one on the leaf grid.
pub fn leaves_ordered(leaf: &PerturbedLeaf) -> Result<bool> {
    for &s in leaf.s_grid() {
        if !(leaf.upper_deviation(s)?[0] < leaf.lower_deviation(s)?[0]) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Search parameters for the barrier constants.
#[derive(Debug, Clone, Serialize)]
pub struct BarrierSearch {
    pub a_start: f64,
    pub b_start: f64,
    pub max_doublings: usize,
    /// Radius of the square on which signs and ordering are verified.
    pub check_radius: f64,
    /// Points per side of the sign/ordering grid.
    pub check_points: usize,
    /// Finite-difference step of the sign check.
    pub check_h: f64,
    /// Accepted wrong-signed operator size in the sign check.
    pub sign_tolerance: f64,
}

impl Default for BarrierSearch {
    fn default() -> Self {
        BarrierSearch {
            a_start: 10.0,
            b_start: 1.0 / 64.0,
            max_doublings: 12,
            check_radius: 8.0,
            check_points: 16,
            check_h: 1e-2,
            sign_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BarrierReport {
    pub eps0: f64,
    pub a: f64,
    pub b: f64,
    pub d: f64,
    pub constants: FunctionConstants,
    pub final_margin: f64,
    pub leaves_ordered: bool,
    pub super_sign: SignSummary,
    pub sub_sign: SignSummary,
    pub ordering_violations: usize,
    pub search: BarrierSearch,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SignSummary {
    pub h: f64,
    pub points: usize,
    pub max_violation: f64,
    pub max_abs_operator: f64,
}

impl From<&SignReport> for SignSummary {
    fn from(r: &SignReport) -> Self {
        SignSummary { h: r.h, points: r.points, max_violation: r.max_violation, max_abs_operator: r.max_abs_operator }
    }
}

/// Chooses `A`, `B`, `D` by doubling searches and verifies both barriers.
pub fn build_barriers(leaf: PerturbedLeaf, search: &BarrierSearch) -> Result<(BarrierSpec, BarrierReport)> {
    let constants = measure_function_constants(&leaf)?;
    let (s_grid, t_grid) = final_inequality_grids();
    let mut a = search.a_start;
    let mut final_margin = check_final_inequality(a, &s_grid, &t_grid);
    let mut tries = 0;
    while final_margin < constants.c_req {
        tries += 1;
        if tries > search.max_doublings {
            return Err(Error::Construction(format!("no A up to {a} clears C_req = {:e}", constants.c_req)));
        }
        a *= 2.0;
        final_margin = check_final_inequality(a, &s_grid, &t_grid);
    }

    let ordered = leaves_ordered(&leaf)?;
    if !ordered {
        return Err(Error::Construction("lower leaf does not lie above the upper leaf".into()));
    }

    let grid = sign_check_grid(search.check_radius, search.check_points);
    let mut b = search.b_start;
    let mut d = 0.0;
    let mut spec = BarrierSpec::new(leaf, a, b, d)?;
    let mut sub = verify_mean_curvature_sign(&spec, BarrierKind::Subsolution, &grid, search.check_h)?;
    let mut tries = 0;
    while sub.max_violation > search.sign_tolerance {
        tries += 1;
        if tries > search.max_doublings {
            return Err(Error::Construction(format!("no B up to {b} makes the subsolution sign check pass")));
        }
        b *= 2.0;
        spec.b = b;
        sub = verify_mean_curvature_sign(&spec, BarrierKind::Subsolution, &grid, search.check_h)?;
    }

    let mut violations = ordering_violations(&spec, &grid)?;
    let mut tries = 0;
    while violations > 0 {
        tries += 1;
        if tries > search.max_doublings {
            return Err(Error::Construction(format!("no D up to {d} orders the barriers")));
        }
        d = if d == 0.0 { 1.0 / 64.0 } else { 2.0 * d };
        spec.d = d;
        violations = ordering_violations(&spec, &grid)?;
    }

    let sup = verify_mean_curvature_sign(&spec, BarrierKind::Supersolution, &grid, search.check_h)?;
    if sup.max_violation > search.sign_tolerance {
        return Err(Error::Construction(format!(
            "supersolution sign check fails with violation {:e}",
            sup.max_violation
        )));
    }
    let report = BarrierReport {
        eps0: spec.eps0,
        a,
        b,
        d,
        constants,
        final_margin,
        leaves_ordered: ordered,
        super_sign: (&sup).into(),
        sub_sign: (&sub).into(),
        ordering_violations: violations,
        search: search.clone(),
    };
    Ok((spec, report))
}

/// CSV `s,t,u_bar,u_under,msop_bar,msop_under` on the interior grid.
pub fn barrier_csv(spec: &BarrierSpec, grid: &[ReducedPoint], h: f64) -> Result<String> {
    let mut out = String::from("s,t,u_bar,u_under,msop_bar,msop_under\n");
    for p in grid {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.s,
            p.t,
            spec.supersolution_value(*p)?,
            spec.subsolution_value(*p)?,
            spec.reduced_operator(BarrierKind::Supersolution, p.s, p.t, h)?,
            spec.reduced_operator(BarrierKind::Subsolution, p.s, p.t, h)?,
        ));
    }
    Ok(out)
}
