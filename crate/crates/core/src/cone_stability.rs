//! Stability of rotationally symmetric minimal cones through the radial
//! reduction of the second variation.
//!
//! A cone is described by its dimension `n` and the coefficient `kappa` of
//! `|A|^2 = kappa / r^2`. Radial test functions see the form
//! `Q(phi) = int (phi'^2 - kappa phi^2 / r^2) r^{n-1} dr`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::quad::GaussLegendre;

/// Radial nodes of the discretized test family.
pub const DEFAULT_NODES: usize = 256;
/// Annulus of the discretized test family.
pub const DEFAULT_ANNULUS: (f64, f64) = (1.0, 20.0);
/// Samples taken by [`oscillating_test_function`].
pub const DEFAULT_SAMPLES: usize = 257;

const STURM_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConeSpec {
    pub n: usize,
    pub kappa: f64,
}

impl ConeSpec {
    pub fn new(n: usize, kappa: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Input(format!("cone dimension must be at least 2, got {n}")));
        }
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::Input(format!("kappa must be finite and non-negative, got {kappa}")));
        }
        Ok(Self { n, kappa })
    }

    /// `{|x| = |y|}` in `R^m x R^m`: dimension `2m - 1`, `|A|^2 r^2 = 2m - 2`.
    pub fn symmetric(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::Input(format!("symmetric cone needs m >= 2, got {m}")));
        }
        Self::new(2 * m - 1, (2 * m - 2) as f64)
    }

    /// Best constant in `int phi'^2 r^{n-1} >= H int phi^2 r^{n-3}`.
    pub fn hardy_constant(&self) -> f64 {
        let d = self.n as f64 - 2.0;
        d * d / 4.0
    }
}

/// Coefficient of `r^{alpha-2}` in `(Delta + |A|^2) r^alpha` on the cone.
pub fn radial_jacobi_coefficient(spec: &ConeSpec, alpha: f64) -> f64 {
    alpha * (alpha + spec.n as f64 - 2.0) + spec.kappa
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimonsExponents {
    pub roots: [Complex64; 2],
    pub oscillation: bool,
}

/// Roots of `l^2 + (n - 4) l + gamma = 0`.
pub fn simons_exponents(n: usize, gamma: f64) -> Result<SimonsExponents> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Domain(format!("gamma must be positive, got {gamma}")));
    }
    let p = n as f64 - 4.0;
    let disc = p * p - 4.0 * gamma;
    let roots = if disc < 0.0 {
        let im = (-disc).sqrt() / 2.0;
        [Complex64::new(-p / 2.0, im), Complex64::new(-p / 2.0, -im)]
    } else {
        // Stable form of the quadratic formula.
        let q = -0.5 * (p + p.signum() * disc.sqrt());
        let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q, gamma / q) };
        let (hi, lo) = if r1 >= r2 { (r1, r2) } else { (r2, r1) };
        [Complex64::new(hi, 0.0), Complex64::new(lo, 0.0)]
    };
    Ok(SimonsExponents { roots, oscillation: disc < 0.0 })
}

/// Closed form `r^{-(n-4)/2} sin(omega log(r/a))` on its first positive arch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OscillatingFunction {
    pub n: usize,
    pub gamma: f64,
    pub omega: f64,
    pub a: f64,
    pub b: f64,
}

impl OscillatingFunction {
    pub fn new(n: usize, gamma: f64, r_min: f64) -> Result<Self> {
        if !(r_min > 0.0) || !r_min.is_finite() {
            return Err(Error::Domain(format!("inner radius must be positive, got {r_min}")));
        }
        let ex = simons_exponents(n, gamma)?;
        if !ex.oscillation {
            return Err(Error::Domain(format!(
                "no oscillation for n = {n}, gamma = {gamma}: (n-4)^2 >= 4 gamma"
            )));
        }
        let omega = ex.roots[0].im;
        Ok(Self { n, gamma, omega, a: r_min, b: r_min * (std::f64::consts::PI / omega).exp() })
    }

    fn power(&self) -> f64 {
        -(self.n as f64 - 4.0) / 2.0
    }

    /// `(psi, psi', psi'')` at `r > 0`.
    pub fn eval(&self, r: f64) -> [f64; 3] {
        let m = self.power();
        let w = self.omega;
        let th = w * (r / self.a).ln();
        let (s, c) = th.sin_cos();
        let rm = r.powf(m);
        let psi = rm * s;
        let psi_p = rm / r * (m * s + w * c);
        let psi_pp = rm / (r * r) * ((m * (m - 1.0) - w * w) * s + (2.0 * m - 1.0) * w * c);
        [psi, psi_p, psi_pp]
    }

    /// `r^2 (psi'' + (n-3) psi'/r + gamma psi / r^2)`.
    pub fn ode_residual(&self, r: f64) -> f64 {
        let [p, pp, ppp] = self.eval(r);
        r * r * ppp + (self.n as f64 - 3.0) * r * pp + self.gamma * p
    }

    /// Samples on a uniform grid of `[a, b]`, with exact end zeros.
    pub fn sample(&self, count: usize) -> Result<RadialTestFunction> {
        if count < 2 {
            return Err(Error::Input("need at least two samples".into()));
        }
        let h = (self.b - self.a) / (count - 1) as f64;
        let r: Vec<f64> = (0..count).map(|i| if i + 1 == count { self.b } else { self.a + h * i as f64 }).collect();
        let mut values = Vec::with_capacity(count);
        let mut slopes = Vec::with_capacity(count);
        for &x in &r {
            let [p, pp, _] = self.eval(x);
            values.push(p);
            slopes.push(pp);
        }
        values[0] = 0.0;
        values[count - 1] = 0.0;
        RadialTestFunction::with_slopes(r, values, slopes)
    }
}

/// `psi` for `(n, gamma)` with first zero at `r_min`, sampled on
/// [`DEFAULT_SAMPLES`] radii.
pub fn oscillating_test_function(n: usize, gamma: f64, r_min: f64) -> Result<RadialTestFunction> {
    OscillatingFunction::new(n, gamma, r_min)?.sample(DEFAULT_SAMPLES)
}

/// Radial profile sampled on an increasing grid, vanishing at both ends.
///
/// With slopes the profile is read as a cubic Hermite interpolant, otherwise
/// as piecewise linear.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialTestFunction {
    pub r: Vec<f64>,
    pub values: Vec<f64>,
    pub slopes: Option<Vec<f64>>,
}

impl RadialTestFunction {
    pub fn new(r: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::check(&r, &values)?;
        Ok(Self { r, values, slopes: None })
    }

    pub fn with_slopes(r: Vec<f64>, values: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        Self::check(&r, &values)?;
        if slopes.len() != r.len() {
            return Err(Error::Input("slopes and radii differ in length".into()));
        }
        Ok(Self { r, values, slopes: Some(slopes) })
    }

    fn check(r: &[f64], values: &[f64]) -> Result<()> {
        if r.len() < 2 || r.len() != values.len() {
            return Err(Error::Input("need matching radii and values, at least two".into()));
        }
        if !(r[0] > 0.0) || r.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Input("radii must be positive and strictly increasing".into()));
        }
        if values[0] != 0.0 || values[values.len() - 1] != 0.0 {
            return Err(Error::Input("test function must vanish at both ends".into()));
        }
        Ok(())
    }

    pub fn a(&self) -> f64 {
        self.r[0]
    }

    pub fn b(&self) -> f64 {
        self.r[self.r.len() - 1]
    }

    /// `(phi, phi')` on cell `i` at local coordinate `u` in `[0, 1]`.
    fn cell_eval(&self, i: usize, u: f64) -> (f64, f64) {
        let h = self.r[i + 1] - self.r[i];
        let (f0, f1) = (self.values[i], self.values[i + 1]);
        match &self.slopes {
            None => (f0 + u * (f1 - f0), (f1 - f0) / h),
            Some(d) => {
                let (d0, d1) = (d[i] * h, d[i + 1] * h);
                let u2 = u * u;
                let u3 = u2 * u;
                let v = (2.0 * u3 - 3.0 * u2 + 1.0) * f0
                    + (u3 - 2.0 * u2 + u) * d0
                    + (-2.0 * u3 + 3.0 * u2) * f1
                    + (u3 - u2) * d1;
                let dv = (6.0 * u2 - 6.0 * u) * f0
                    + (3.0 * u2 - 4.0 * u + 1.0) * d0
                    + (-6.0 * u2 + 6.0 * u) * f1
                    + (3.0 * u2 - 2.0 * u) * d1;
                (v, dv / h)
            }
        }
    }
}

fn integrate_cells<F: Fn(f64, f64, f64) -> f64>(phi: &RadialTestFunction, f: F) -> f64 {
    let gl = GaussLegendre::new(6);
    let mut total = 0.0;
    for i in 0..phi.r.len() - 1 {
        let (lo, hi) = (phi.r[i], phi.r[i + 1]);
        let h = hi - lo;
        for (x, w) in gl.nodes().iter().zip(gl.weights()) {
            let u = 0.5 * (x + 1.0);
            let (v, dv) = phi.cell_eval(i, u);
            total += 0.5 * h * w * f(lo + u * h, v, dv);
        }
    }
    total
}

/// `int_a^b (phi'^2 - kappa phi^2 / r^2) r^{n-1} dr`, Gauss rule per cell.
pub fn stability_quadratic_form(spec: &ConeSpec, phi: &RadialTestFunction) -> f64 {
    let e = spec.n as f64 - 1.0;
    integrate_cells(phi, |r, v, dv| (dv * dv - spec.kappa * v * v / (r * r)) * r.powf(e))
}

/// `int_a^b phi^2 r^{n-3} dr`.
pub fn weighted_norm_sq(n: usize, phi: &RadialTestFunction) -> f64 {
    let e = n as f64 - 3.0;
    integrate_cells(phi, |r, v, _| v * v * r.powf(e))
}

/// Smallest value of `Q(phi) / int phi^2 r^{n-3}` over the hat-function span.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FormMinimum {
    pub a: f64,
    pub b: f64,
    pub nodes: usize,
    /// Lowest eigenvalue of the discrete Dirichlet problem for the Hardy operator.
    pub mu_min: f64,
    /// `mu_min - kappa`.
    pub form_min: f64,
    /// `|form_min(nodes) - form_min(2 nodes - 1)|`.
    pub discretization_error: f64,
}

/// Tridiagonal stiffness and mass of the hat basis on interior nodes.
struct Pencil {
    k_diag: Vec<f64>,
    k_off: Vec<f64>,
    p_diag: Vec<f64>,
    p_off: Vec<f64>,
}

impl Pencil {
    fn assemble(n: usize, a: f64, b: f64, nodes: usize) -> Self {
        let gl = GaussLegendre::new(6);
        let h = (b - a) / (nodes - 1) as f64;
        let m = nodes - 2;
        let mut k_diag = vec![0.0; m];
        let mut k_off = vec![0.0; m.saturating_sub(1)];
        let mut p_diag = vec![0.0; m];
        let mut p_off = vec![0.0; m.saturating_sub(1)];
        let ek = n as f64 - 1.0;
        let ep = n as f64 - 3.0;
        for cell in 0..nodes - 1 {
            let lo = a + h * cell as f64;
            let (mut kw, mut p00, mut p01, mut p11) = (0.0, 0.0, 0.0, 0.0);
            for (x, w) in gl.nodes().iter().zip(gl.weights()) {
                let u = 0.5 * (x + 1.0);
                let r = lo + u * h;
                let wq = 0.5 * h * w;
                kw += wq * r.powf(ek);
                let rp = wq * r.powf(ep);
                p00 += rp * (1.0 - u) * (1.0 - u);
                p01 += rp * (1.0 - u) * u;
                p11 += rp * u * u;
            }
            kw /= h * h;
            // Local nodes cell and cell + 1 map to interior indices shifted by one.
            let left = cell.checked_sub(1);
            let right = if cell < m { Some(cell) } else { None };
            if let Some(l) = left {
                k_diag[l] += kw;
                p_diag[l] += p00;
            }
            if let Some(rr) = right {
                k_diag[rr] += kw;
                p_diag[rr] += p11;
            }
            if let (Some(l), Some(_)) = (left, right) {
                k_off[l] -= kw;
                p_off[l] += p01;
            }
        }
        Self { k_diag, k_off, p_diag, p_off }
    }

    /// Number of eigenvalues of `K - mu P` below zero (Sturm count).
    fn count_below(&self, mu: f64) -> usize {
        let mut count = 0;
        let mut d_prev = 1.0;
        for i in 0..self.k_diag.len() {
            let diag = self.k_diag[i] - mu * self.p_diag[i];
            let mut d = diag;
            if i > 0 {
                let off = self.k_off[i - 1] - mu * self.p_off[i - 1];
                d -= off * off / d_prev;
            }
            if d == 0.0 {
                d = -f64::EPSILON * diag.abs().max(1e-300);
            }
            if d < 0.0 {
                count += 1;
            }
            d_prev = d;
        }
        count
    }

    fn lowest(&self) -> f64 {
        let mut hi = self
            .k_diag
            .iter()
            .zip(&self.p_diag)
            .map(|(k, p)| k / p)
            .fold(0.0_f64, f64::max)
            .max(1.0);
        while self.count_below(hi) == 0 {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        while self.count_below(lo) > 0 {
            lo = if lo == 0.0 { -1.0 } else { 2.0 * lo };
        }
        while hi - lo > STURM_TOL * hi.abs().max(1.0) {
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid) > 0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

fn lowest_ratio(n: usize, a: f64, b: f64, nodes: usize) -> f64 {
    Pencil::assemble(n, a, b, nodes).lowest()
}

/// Minimum of the normalized form over piecewise-linear test functions on
/// `nodes` uniform radii of `[a, b]`.
pub fn minimize_form(spec: &ConeSpec, a: f64, b: f64, nodes: usize) -> Result<FormMinimum> {
    if !(a > 0.0) || !(b > a) || !b.is_finite() {
        return Err(Error::Input(format!("annulus needs 0 < a < b, got [{a}, {b}]")));
    }
    if nodes < 4 {
        return Err(Error::Input(format!("need at least 4 nodes, got {nodes}")));
    }
    let mu = lowest_ratio(spec.n, a, b, nodes);
    let mu_fine = lowest_ratio(spec.n, a, b, 2 * nodes - 1);
    Ok(FormMinimum {
        a,
        b,
        nodes,
        mu_min: mu,
        form_min: mu - spec.kappa,
        discretization_error: (mu - mu_fine).abs(),
    })
}

/// Exact lowest Dirichlet eigenvalue of the weighted Hardy problem on `[a, b]`.
pub fn exact_mu_min(n: usize, a: f64, b: f64) -> f64 {
    let d = n as f64 - 2.0;
    let l = std::f64::consts::PI / (b / a).ln();
    d * d / 4.0 + l * l
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InstabilityCertificate {
    pub n: usize,
    pub kappa: f64,
    pub gamma: f64,
    pub a: f64,
    pub b: f64,
    /// `Q(c psi)` with `c = sqrt(kappa) / r`.
    pub form_value: f64,
    /// `form_value / int (c psi)^2 r^{n-3}`.
    pub margin: f64,
    pub negative: bool,
}

/// Evaluates the form on `c psi`, where `psi` oscillates for `(n, gamma)`.
pub fn simons_instability_certificate(spec: &ConeSpec, gamma: f64) -> Result<InstabilityCertificate> {
    if !(spec.kappa > 0.0) {
        return Err(Error::Domain("certificate needs a non-flat cone".into()));
    }
    let osc = OscillatingFunction::new(spec.n, gamma, DEFAULT_ANNULUS.0)?;
    let count = 4 * DEFAULT_SAMPLES - 3;
    let h = (osc.b - osc.a) / (count - 1) as f64;
    let c0 = spec.kappa.sqrt();
    let mut r = Vec::with_capacity(count);
    let mut values = Vec::with_capacity(count);
    let mut slopes = Vec::with_capacity(count);
    for i in 0..count {
        let x = if i + 1 == count { osc.b } else { osc.a + h * i as f64 };
        let [p, pp, _] = osc.eval(x);
        r.push(x);
        values.push(c0 * p / x);
        slopes.push(c0 * (pp / x - p / (x * x)));
    }
    values[0] = 0.0;
    values[count - 1] = 0.0;
    let phi = RadialTestFunction::with_slopes(r, values, slopes)?;
    let form_value = stability_quadratic_form(spec, &phi);
    let margin = form_value / weighted_norm_sq(spec.n, &phi);
    Ok(InstabilityCertificate {
        n: spec.n,
        kappa: spec.kappa,
        gamma,
        a: osc.a,
        b: osc.b,
        form_value,
        margin,
        negative: form_value < 0.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeReport {
    pub n: usize,
    pub kappa: f64,
    pub hardy_constant: f64,
    /// `[re, im]` pairs.
    pub exponents: [[f64; 2]; 2],
    pub oscillation: bool,
    pub form_min: f64,
    pub stable: bool,
}

/// Exponents for `gamma` and the discretized form minimum on the default annulus.
pub fn cone_report(spec: &ConeSpec, gamma: f64, nodes: usize) -> Result<ConeReport> {
    let ex = simons_exponents(spec.n, gamma)?;
    let fm = minimize_form(spec, DEFAULT_ANNULUS.0, DEFAULT_ANNULUS.1, nodes)?;
    Ok(ConeReport {
        n: spec.n,
        kappa: spec.kappa,
        hardy_constant: spec.hardy_constant(),
        exponents: ex.roots.map(|z| [z.re, z.im]),
        oscillation: ex.oscillation,
        form_min: fm.form_min,
        stable: fm.form_min >= -10.0 * fm.discretization_error,
    })
}
