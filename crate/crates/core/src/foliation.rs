//! The minimal leaf `{|y| = sigma(|x|)}` in R^8 that foliates one side of
//! the Simons cone.
//!
//! `sigma` solves `G(sigma) = 0` with even initial data `sigma(0) = 1`. For
//! `s > 1` the problem is integrated in logarithmic time `t = log s`, where
//! `X(t) = (e^{-t} sigma(e^t), sigma'(e^t))` obeys the autonomous system
//! `X' = V(X)` with a stable node at `(1, 1)`.

use serde::Serialize;

use crate::error::{Error, IntegrationState, Result};
use crate::numerics::interp::QuinticHermite;
use crate::numerics::ode::{self, Stop, Tolerances};

/// Radius at which the series start hands over to the integrator.
pub const SERIES_START: f64 = 1e-3;

/// Absolute band used by [`in_trapping_region`] to absorb boundary grazing.
pub const TRAPPING_BAND: f64 = 1e-10;

pub const DEFAULT_FIT_WINDOW: (f64, f64) = (3.0, 5.0);

/// Even Taylor coefficients of the leaf at the origin: `sigma = 1 + 3/8 s^2 - 15/512 s^4 + ...`.
const SERIES_C2: f64 = 3.0 / 8.0;
const SERIES_C4: f64 = -15.0 / 512.0;

/// Value and first two derivatives of a profile curve at one radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Derivs {
    pub sigma: f64,
    pub sigma_p: f64,
    pub sigma_pp: f64,
}

/// A rotationally symmetric profile `t = sigma(s)` that can be sampled.
pub trait Profile {
    fn derivs(&self, s: f64) -> Result<Derivs>;
}

/// The Simons cone itself, `sigma(s) = s`. Singular at the origin.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConeProfile;

impl Profile for ConeProfile {
    fn derivs(&self, s: f64) -> Result<Derivs> {
        if s <= 0.0 {
            return Err(Error::Domain(format!("cone profile needs s > 0, got {s}")));
        }
        Ok(Derivs { sigma: s, sigma_p: 1.0, sigma_pp: 0.0 })
    }
}

/// `G(sigma) = sigma'' + 3(1 + sigma'^2)(sigma'/s - 1/sigma)`.
///
/// The mean curvature of `{|y| = sigma(|x|)}` is `(1 + sigma'^2)^{-3/2} G`.
pub fn mean_curvature_residual(sigma: f64, sigma_p: f64, sigma_pp: f64, s: f64) -> Result<f64> {
    if !(s > 0.0) || !(sigma > 0.0) {
        return Err(Error::Domain(format!("need s > 0 and sigma > 0, got s = {s}, sigma = {sigma}")));
    }
    Ok(sigma_pp + 3.0 * (1.0 + sigma_p * sigma_p) * (sigma_p / s - 1.0 / sigma))
}

/// `G` evaluated on a [`Derivs`] triple, with the even limit at `s = 0`
/// (where `sigma'/s -> sigma''`).
pub(crate) fn curvature_functional(d: &Derivs, s: f64) -> f64 {
    let ratio = if s == 0.0 { d.sigma_pp } else { d.sigma_p / s };
    d.sigma_pp + 3.0 * (1.0 + d.sigma_p * d.sigma_p) * (ratio - 1.0 / d.sigma)
}

/// The leaf ODE solved for the second derivative.
fn leaf_accel(s: f64, sigma: f64, sigma_p: f64) -> f64 {
    -3.0 * (1.0 + sigma_p * sigma_p) * (sigma_p / s - 1.0 / sigma)
}

/// Phase-plane vector field `V(x, y) = (-x + y, 3(1 + y^2)(1/x - y))`.
pub fn vector_field(x: f64, y: f64) -> Result<(f64, f64)> {
    if x == 0.0 {
        return Err(Error::Domain("vector field is singular at x = 0".into()));
    }
    Ok((-x + y, 3.0 * (1.0 + y * y) * (1.0 / x - y)))
}

/// Jacobian of [`vector_field`].
pub fn vector_field_jacobian(x: f64, y: f64) -> Result<[[f64; 2]; 2]> {
    if x == 0.0 {
        return Err(Error::Domain("vector field is singular at x = 0".into()));
    }
    Ok([
        [-1.0, 1.0],
        [-3.0 * (1.0 + y * y) / (x * x), 6.0 * y * (1.0 / x - y) - 3.0 * (1.0 + y * y)],
    ])
}

/// The forward-invariant region `{x >= 1} ∩ {x^{-5/2} <= y <= x^{-1}}`.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrappingRegion;

impl TrappingRegion {
    /// Membership with an absolute tolerance `band` on every inequality.
    pub fn contains_with(&self, x: f64, y: f64, band: f64) -> bool {
        x >= 1.0 - band && y >= x.powf(-2.5) - band && y <= 1.0 / x + band
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.contains_with(x, y, TRAPPING_BAND)
    }
}

pub fn in_trapping_region(x: f64, y: f64) -> bool {
    TrappingRegion.contains(x, y)
}

/// Polynomial with integer coefficients, lowest degree first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IntPoly(pub Vec<i64>);

impl IntPoly {
    pub fn derivative(&self) -> IntPoly {
        IntPoly(self.0.iter().enumerate().skip(1).map(|(k, c)| c * k as i64).collect())
    }

    pub fn eval_int(&self, z: i64) -> i128 {
        self.0.iter().rev().fold(0i128, |acc, &c| acc * z as i128 + c as i128)
    }

    /// Exact value at `num / den` as an unreduced fraction.
    pub fn eval_rational(&self, num: i64, den: i64) -> (i128, i128) {
        assert!(den != 0);
        let deg = self.0.len().saturating_sub(1) as u32;
        let mut acc = 0i128;
        for (k, &c) in self.0.iter().enumerate() {
            acc += c as i128 * (num as i128).pow(k as u32) * (den as i128).pow(deg - k as u32);
        }
        (acc, (den as i128).pow(deg))
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * z + c as f64)
    }
}

/// `P(z) = 6z^13 - 11z^10 + 11z^3 - 6`; positivity of `P` on `z > 1` is the
/// inward-pointing condition on the lower boundary curve, with `z = sqrt(x)`.
pub fn boundary_polynomial() -> IntPoly {
    let mut c = vec![0i64; 14];
    c[13] = 6;
    c[10] = -11;
    c[3] = 11;
    c[0] = -6;
    IntPoly(c)
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryReport {
    pub n_samples: usize,
    pub x_min: f64,
    pub x_max: f64,
    /// Minimum inward flux `-(V_x/x^2 + V_y)` across `y = 1/x`.
    pub top_min_margin: f64,
    /// Largest `|V_y|` on the top curve (vanishes identically).
    pub top_max_abs_vertical: f64,
    /// Largest horizontal component on the top curve (must be negative).
    pub top_max_horizontal: f64,
    /// Minimum inward flux `V_y + 5/2 x^{-7/2} V_x` across `y = x^{-5/2}`.
    pub bottom_min_margin: f64,
    /// Minimum of `P(sqrt(x))` over the samples.
    pub poly_min: f64,
    pub p_at_one: i128,
    pub p_prime_at_one: i128,
    /// Coefficients of `(P'(z)/z^2)'`.
    pub second_factor: IntPoly,
}

impl BoundaryReport {
    pub fn passed(&self) -> bool {
        self.top_min_margin > 0.0
            && self.bottom_min_margin > 0.0
            && self.top_max_horizontal < 0.0
            && self.poly_min > 0.0
            && self.p_at_one == 0
            && self.p_prime_at_one == 1
    }
}

pub fn verify_trapping_boundary(n_samples: usize) -> Result<BoundaryReport> {
    verify_trapping_boundary_on(n_samples, 1.0 + 1e-3, 1e3)
}

/// Samples both boundary curves at `n_samples` log-spaced abscissae in `[x_min, x_max]`.
pub fn verify_trapping_boundary_on(n_samples: usize, x_min: f64, x_max: f64) -> Result<BoundaryReport> {
    if n_samples < 2 {
        return Err(Error::Domain("need at least two boundary samples".into()));
    }
    if !(x_min > 1.0 && x_max > x_min) {
        return Err(Error::Domain(format!("bad sampling range ({x_min}, {x_max}]")));
    }
    let p = boundary_polynomial();
    let dp = p.derivative();
    // (P'/z^2)' computed from the coefficients of P' shifted down by two.
    let reduced = IntPoly(dp.0.iter().skip(2).copied().collect()).derivative();

    let mut report = BoundaryReport {
        n_samples,
        x_min,
        x_max,
        top_min_margin: f64::INFINITY,
        top_max_abs_vertical: 0.0,
        top_max_horizontal: f64::NEG_INFINITY,
        bottom_min_margin: f64::INFINITY,
        poly_min: f64::INFINITY,
        p_at_one: p.eval_int(1),
        p_prime_at_one: dp.eval_int(1),
        second_factor: reduced,
    };
    let (l0, l1) = (x_min.ln(), x_max.ln());
    for k in 0..n_samples {
        let x = (l0 + (l1 - l0) * k as f64 / (n_samples - 1) as f64).exp();

        let (vx, vy) = vector_field(x, 1.0 / x)?;
        report.top_min_margin = report.top_min_margin.min(-(vx / (x * x) + vy));
        report.top_max_abs_vertical = report.top_max_abs_vertical.max(vy.abs());
        report.top_max_horizontal = report.top_max_horizontal.max(vx);

        let yb = x.powf(-2.5);
        let (vx, vy) = vector_field(x, yb)?;
        report.bottom_min_margin = report.bottom_min_margin.min(vy + 2.5 * x.powf(-3.5) * vx);
        report.poly_min = report.poly_min.min(p.eval(x.sqrt()));
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct LinearAnalysis {
    /// Jacobian of `V` at the node `(1, 1)`.
    pub matrix: [[f64; 2]; 2],
    /// Eigenvalues with eigenvectors normalized to first component 1.
    pub eigenpairs: [(f64, [f64; 2]); 2],
    /// `-2Me.e` at slope 1.
    pub form_at_one: f64,
    /// `-2Me.e` at slope 5/2.
    pub form_at_five_halves: f64,
    pub form_min: f64,
    pub form_max: f64,
    /// Whether the sampled form is increasing in the slope.
    pub form_monotone: bool,
}

/// `-2 M e . e` for `e = (1, -slope)/sqrt(1 + slope^2)`.
pub fn slope_form(m: &[[f64; 2]; 2], slope: f64) -> f64 {
    let norm2 = 1.0 + slope * slope;
    let e = [1.0, -slope];
    let me = [m[0][0] * e[0] + m[0][1] * e[1], m[1][0] * e[0] + m[1][1] * e[1]];
    -2.0 * (me[0] * e[0] + me[1] * e[1]) / norm2
}

pub fn linear_analysis() -> LinearAnalysis {
    let m = vector_field_jacobian(1.0, 1.0).expect("x = 1 is regular");
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = (tr * tr - 4.0 * det).sqrt();
    let mut eig = [0.5 * (tr + disc), 0.5 * (tr - disc)];
    eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let pairs = eig.map(|l| (l, [1.0, (l - m[0][0]) / m[0][1]]));

    let n = 1001;
    let samples: Vec<f64> = (0..n).map(|k| slope_form(&m, 1.0 + 1.5 * k as f64 / (n - 1) as f64)).collect();
    LinearAnalysis {
        matrix: m,
        eigenpairs: pairs,
        form_at_one: slope_form(&m, 1.0),
        form_at_five_halves: slope_form(&m, 2.5),
        form_min: samples.iter().copied().fold(f64::INFINITY, f64::min),
        form_max: samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        form_monotone: samples.windows(2).all(|w| w[1] > w[0]),
    }
}

/// A point `(t, x, y)` of the phase trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseState {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

impl PhaseState {
    /// Deviation `Y = X - (1, 1)`.
    pub fn deviation(&self) -> [f64; 2] {
        [self.x - 1.0, self.y - 1.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticFit {
    pub a: f64,
    pub b: f64,
    /// `max ||Y - fit|| e^{6t}` over the window.
    pub max_residual: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

/// Least-squares fit of `Y(t) ≈ a e^{-3t}(1, -2) + b e^{-4t}(1, -3)` over
/// the states whose `t` falls in `window`.
pub fn fit_asymptotics_states(states: &[PhaseState], window: (f64, f64)) -> Result<AsymptoticFit> {
    let (t0, t1) = window;
    if !(t1 - t0 >= 1.0) {
        return Err(Error::Fit(format!("window [{t0}, {t1}] is shorter than 1")));
    }
    let (first, last) = match (states.first(), states.last()) {
        (Some(f), Some(l)) => (f.t, l.t),
        _ => return Err(Error::Fit("empty trajectory".into())),
    };
    if t0 < first || t1 > last + 1e-12 {
        return Err(Error::Fit(format!("window [{t0}, {t1}] leaves the integrated range [{first}, {last}]")));
    }
    // Below this size the deviation is dominated by rounding of x and y.
    if (-3.0 * t1).exp() < 1e-13 {
        return Err(Error::Fit(format!("window end t = {t1} is too late to resolve the e^(-3t) mode")));
    }

    // Rows are scaled by e^{3t}: Y e^{3t} = a p + b e^{-t} q.
    let (p, q) = ([1.0, -2.0], [1.0, -3.0]);
    let mut ata = [[0.0; 2]; 2];
    let mut atb = [0.0; 2];
    let mut used = 0;
    for st in states.iter().filter(|s| s.t >= t0 && s.t <= t1) {
        let dev = st.deviation();
        let w = (3.0 * st.t).exp();
        let decay = (-st.t).exp();
        for i in 0..2 {
            let row = [p[i], decay * q[i]];
            let rhs = dev[i] * w;
            for r in 0..2 {
                atb[r] += row[r] * rhs;
                for c in 0..2 {
                    ata[r][c] += row[r] * row[c];
                }
            }
        }
        used += 1;
    }
    if used < 4 {
        return Err(Error::Fit(format!("only {used} samples in window")));
    }
    let det = ata[0][0] * ata[1][1] - ata[0][1] * ata[1][0];
    let trace = ata[0][0] + ata[1][1];
    let cond = trace * trace / det.abs();
    if !(cond < 1e12) {
        return Err(Error::Fit(format!("normal equations are ill-conditioned (cond ~ {cond:e})")));
    }
    let a = (atb[0] * ata[1][1] - atb[1] * ata[0][1]) / det;
    let b = (ata[0][0] * atb[1] - ata[1][0] * atb[0]) / det;

    let mut max_residual: f64 = 0.0;
    for st in states.iter().filter(|s| s.t >= t0 && s.t <= t1) {
        let dev = st.deviation();
        let (e3, e4) = ((-3.0 * st.t).exp(), (-4.0 * st.t).exp());
        let r0 = dev[0] - a * e3 * p[0] - b * e4 * q[0];
        let r1 = dev[1] - a * e3 * p[1] - b * e4 * q[1];
        max_residual = max_residual.max(r0.hypot(r1) * (6.0 * st.t).exp());
    }
    Ok(AsymptoticFit { a, b, max_residual, window, samples: used })
}

pub fn fit_asymptotics(profile: &LeafProfile, window: (f64, f64)) -> Result<AsymptoticFit> {
    fit_asymptotics_states(&profile.phase, window)
}

/// Sampled BDG leaf together with its asymptotic coefficients.
#[derive(Debug, Clone)]
pub struct LeafProfile {
    pub s_grid: Vec<f64>,
    pub sigma: Vec<f64>,
    pub sigma_p: Vec<f64>,
    pub sigma_pp: Vec<f64>,
    /// Coefficient of `s^{-2}` in `sigma - s`.
    pub a: f64,
    /// Coefficient of `s^{-3}` in `sigma - s`.
    pub b: f64,
    pub fit_window: (f64, f64),
    pub fit: AsymptoticFit,
    pub tol: f64,
    /// `sigma - s` per sample, accurate where the leaf hugs the cone.
    dev: Vec<f64>,
    /// `sigma' - 1` per sample.
    dev_p: Vec<f64>,
    phase: Vec<PhaseState>,
    interp: QuinticHermite,
}

fn series(s: f64) -> Derivs {
    let s2 = s * s;
    Derivs {
        sigma: 1.0 + SERIES_C2 * s2 + SERIES_C4 * s2 * s2,
        sigma_p: 2.0 * SERIES_C2 * s + 4.0 * SERIES_C4 * s2 * s,
        sigma_pp: 2.0 * SERIES_C2 + 12.0 * SERIES_C4 * s2,
    }
}

impl LeafProfile {
    pub fn s_max(&self) -> f64 {
        *self.s_grid.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.s_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s_grid.is_empty()
    }

    /// Stored `(sigma - s, sigma' - 1)` per sample.
    pub fn deviations(&self) -> (&[f64], &[f64]) {
        (&self.dev, &self.dev_p)
    }

    /// Phase trajectory for every positive sample radius.
    pub fn phase(&self) -> &[PhaseState] {
        &self.phase
    }

    /// Interpolated `(sigma, sigma', sigma'')` on `[0, s_max]`.
    pub fn eval(&self, s: f64) -> Result<Derivs> {
        if s < 0.0 || s > self.s_max() {
            return Err(Error::Domain(format!("s = {s} outside leaf range [0, {}]", self.s_max())));
        }
        if s < SERIES_START {
            return Ok(series(s));
        }
        let [dev, dev_p, sigma_pp] = self.interp.eval(s).expect("range checked");
        Ok(Derivs { sigma: s + dev, sigma_p: 1.0 + dev_p, sigma_pp })
    }

    /// `(sigma - s, sigma' - 1, sigma'')` without cancellation.
    pub fn eval_deviation(&self, s: f64) -> Result<[f64; 3]> {
        if s < 0.0 || s > self.s_max() {
            return Err(Error::Domain(format!("s = {s} outside leaf range [0, {}]", self.s_max())));
        }
        if s < SERIES_START {
            let d = series(s);
            return Ok([d.sigma - s, d.sigma_p - 1.0, d.sigma_pp]);
        }
        Ok(self.interp.eval(s).expect("range checked"))
    }

    /// [`eval_deviation`](Self::eval_deviation) continued past `s_max`.
    pub fn eval_deviation_extended(&self, s: f64) -> Result<[f64; 3]> {
        if s <= self.s_max() {
            return self.eval_deviation(s);
        }
        let (a, b) = (self.a, self.b);
        Ok([
            a * s.powi(-2) + b * s.powi(-3),
            -2.0 * a * s.powi(-3) - 3.0 * b * s.powi(-4),
            6.0 * a * s.powi(-4) + 12.0 * b * s.powi(-5),
        ])
    }

    /// The dilation Jacobi field `sigma - s sigma'` and its derivative `-s sigma''`.
    pub fn dilation_field(&self, s: f64) -> Result<(f64, f64)> {
        if s > self.s_max() {
            let (a, b) = (self.a, self.b);
            return Ok((3.0 * a * s.powi(-2) + 4.0 * b * s.powi(-3), -6.0 * a * s.powi(-3) - 12.0 * b * s.powi(-4)));
        }
        let [dev, dev_p, pp] = self.eval_deviation(s)?;
        Ok((dev - s * dev_p, -s * pp))
    }

    /// Like [`eval`](Self::eval) but continues past `s_max` with the
    /// asymptotic expansion `s + a s^{-2} + b s^{-3}`.
    pub fn eval_extended(&self, s: f64) -> Result<Derivs> {
        if s <= self.s_max() {
            return self.eval(s);
        }
        let (a, b) = (self.a, self.b);
        Ok(Derivs {
            sigma: s + a * s.powi(-2) + b * s.powi(-3),
            sigma_p: 1.0 - 2.0 * a * s.powi(-3) - 3.0 * b * s.powi(-4),
            sigma_pp: 6.0 * a * s.powi(-4) + 12.0 * b * s.powi(-5),
        })
    }

    /// Third derivative from differentiating the leaf ODE.
    pub fn sigma_ppp(&self, s: f64) -> Result<f64> {
        let d = self.eval_extended(s)?;
        if s < 1e-2 {
            return Ok(24.0 * SERIES_C4 * s);
        }
        let w = 1.0 + d.sigma_p * d.sigma_p;
        let ratio = d.sigma_p / s - 1.0 / d.sigma;
        let ds = 3.0 * w * d.sigma_p / (s * s);
        let dsigma = -3.0 * w / (d.sigma * d.sigma);
        let dsigma_p = -6.0 * d.sigma_p * ratio - 3.0 * w / s;
        Ok(ds + dsigma * d.sigma_p + dsigma_p * d.sigma_pp)
    }

    /// Smallest stored `sigma''` (the leaf is locally uniformly convex).
    pub fn min_curvature(&self) -> f64 {
        self.sigma_pp.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest `|G(sigma)|` over the stored positive radii.
    pub fn max_residual(&self) -> f64 {
        self.s_grid
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > 0.0)
            .map(|(i, &s)| {
                mean_curvature_residual(self.sigma[i], self.sigma_p[i], self.sigma_pp[i], s)
                    .map(f64::abs)
                    .unwrap_or(f64::INFINITY)
            })
            .fold(0.0, f64::max)
    }

    /// First radius from which every later phase sample lies in the trapping
    /// region, or `None` if the last sample is outside.
    pub fn trapping_entry(&self) -> Option<f64> {
        let mut entry = None;
        for st in &self.phase {
            if in_trapping_region(st.x, st.y) {
                if entry.is_none() {
                    entry = Some(st.t.exp());
                }
            } else {
                entry = None;
            }
        }
        entry
    }

    /// `max |sigma(s) - s - a s^{-2}| s^3` over stored radii in `[s_lo, s_max]`.
    pub fn expansion_constant(&self, s_lo: f64) -> f64 {
        self.phase
            .iter()
            .filter(|st| st.t.exp() >= s_lo)
            .map(|st| {
                let s = st.t.exp();
                // sigma - s = s (x - 1), kept in deviation form for accuracy.
                (s * (st.x - 1.0) - self.a / (s * s)).abs() * s.powi(3)
            })
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,sigma,sigma_p,sigma_pp\n");
        for i in 0..self.len() {
            out.push_str(&format!("{},{},{},{}\n", self.s_grid[i], self.sigma[i], self.sigma_p[i], self.sigma_pp[i]));
        }
        out
    }

    pub fn phase_csv(&self) -> String {
        let mut out = String::from("t,x,y,in_region\n");
        for st in &self.phase {
            out.push_str(&format!("{},{},{},{}\n", st.t, st.x, st.y, in_trapping_region(st.x, st.y)));
        }
        out
    }
}

impl Profile for LeafProfile {
    fn derivs(&self, s: f64) -> Result<Derivs> {
        self.eval(s)
    }
}

/// Integrates the leaf from the even initial data `sigma(0) = 1` out to
/// `s_max` with local error `tol`.
pub fn integrate_leaf(s_max: f64, tol: f64) -> Result<LeafProfile> {
    if !(s_max >= 10.0) {
        return Err(Error::Domain(format!("s_max must be at least 10, got {s_max}")));
    }
    if !(tol > 0.0 && tol <= 1e-6) {
        return Err(Error::Domain(format!("tol must lie in (0, 1e-6], got {tol}")));
    }

    let start = series(SERIES_START);
    let mut s_grid = vec![0.0, SERIES_START];
    let mut sigma = vec![1.0, start.sigma];
    let mut sigma_p = vec![0.0, start.sigma_p];
    let mut sigma_pp = vec![2.0 * SERIES_C2, start.sigma_pp];
    let mut dev = vec![1.0, start.sigma - SERIES_START];
    let mut dev_p = vec![-1.0, start.sigma_p - 1.0];
    let mut phase = vec![PhaseState { t: SERIES_START.ln(), x: start.sigma / SERIES_START, y: start.sigma_p }];

    let fail = |reason: &str, s: f64, y: [f64; 2], h: f64| Error::Integration {
        reason: reason.to_string(),
        state: IntegrationState { s, sigma: y[0], sigma_p: y[1], step: h },
    };

    // Inner part in the radius itself.
    let inner = ode::integrate(
        |s, y: &[f64; 2]| [y[1], leaf_accel(s, y[0], y[1])],
        SERIES_START,
        [start.sigma, start.sigma_p],
        1.0,
        Tolerances { rtol: tol, atol: tol * 1e-3, h_init: 1e-4, h_max: 1e-2, h_min: 1e-14 },
        |s, y, k| {
            if !(y[0] > 0.0) {
                return false;
            }
            s_grid.push(s);
            sigma.push(y[0]);
            sigma_p.push(y[1]);
            sigma_pp.push(k[1]);
            dev.push(y[0] - s);
            dev_p.push(y[1] - 1.0);
            phase.push(PhaseState { t: s.ln(), x: y[0] / s, y: y[1] });
            true
        },
    );
    match inner.stop {
        Stop::Finished => {}
        Stop::Rejected => return Err(fail("left the physical domain sigma > 0", inner.t, inner.y, inner.h)),
        Stop::StepUnderflow => return Err(fail("step size underflow", inner.t, inner.y, inner.h)),
        Stop::NonFinite => return Err(fail("non-finite state", inner.t, inner.y, inner.h)),
    }

    // Outer part in log time, integrating the deviation from the node (1, 1)
    // so that relative error control follows the decaying mode.
    let x0 = inner.y[0];
    let y0 = inner.y[1];
    let t_end = s_max.ln();
    let outer = ode::integrate(
        |_, d: &[f64; 2]| {
            let (x, y) = (1.0 + d[0], 1.0 + d[1]);
            [d[1] - d[0], 3.0 * (1.0 + y * y) * (-d[0] / x - d[1])]
        },
        0.0,
        [x0 - 1.0, y0 - 1.0],
        t_end,
        Tolerances { rtol: tol, atol: tol * 1e-12, h_init: 1e-3, h_max: 1e-2, h_min: 1e-14 },
        |t, d, k| {
            let x = 1.0 + d[0];
            if !(x > 0.0) {
                return false;
            }
            let s = if t == t_end { s_max } else { t.exp() };
            s_grid.push(s);
            sigma.push(s * x);
            sigma_p.push(1.0 + d[1]);
            sigma_pp.push(k[1] / s);
            dev.push(s * d[0]);
            dev_p.push(d[1]);
            phase.push(PhaseState { t, x, y: 1.0 + d[1] });
            true
        },
    );
    let sigma_at = |d: [f64; 2], t: f64| [t.exp() * (1.0 + d[0]), 1.0 + d[1]];
    match outer.stop {
        Stop::Finished => {}
        Stop::Rejected => {
            return Err(fail("left the physical domain sigma > 0", outer.t.exp(), sigma_at(outer.y, outer.t), outer.h))
        }
        Stop::StepUnderflow => {
            return Err(fail("step size underflow", outer.t.exp(), sigma_at(outer.y, outer.t), outer.h))
        }
        Stop::NonFinite => return Err(fail("non-finite state", outer.t.exp(), sigma_at(outer.y, outer.t), outer.h)),
    }

    let t_max = t_end;
    let window = if t_max >= DEFAULT_FIT_WINDOW.1 {
        DEFAULT_FIT_WINDOW
    } else {
        (t_max - 1.5, t_max)
    };
    let fit = fit_asymptotics_states(&phase, window)?;

    let interp = QuinticHermite::new(s_grid.clone(), dev.clone(), dev_p.clone(), sigma_pp.clone());
    Ok(LeafProfile {
        s_grid,
        sigma,
        sigma_p,
        sigma_pp,
        a: fit.a,
        b: fit.b,
        fit_window: window,
        fit,
        tol,
        dev,
        dev_p,
        phase,
        interp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cone_annihilates_the_functional() {
        for s in [0.1, 1.0, 7.5, 300.0] {
            assert_eq!(mean_curvature_residual(s, 1.0, 0.0, s).unwrap(), 0.0);
        }
    }

    #[test]
    fn residual_direct_substitution() {
        assert_eq!(mean_curvature_residual(2.0, 0.0, 0.0, 1.0).unwrap(), -1.5);
    }

    #[test]
    fn residual_rejects_nonpositive_inputs() {
        assert!(matches!(mean_curvature_residual(1.0, 0.0, 0.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(mean_curvature_residual(-1.0, 0.0, 0.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn vector_field_values() {
        assert_eq!(vector_field(1.0, 1.0).unwrap(), (0.0, 0.0));
        assert_eq!(vector_field(1.0, 0.0).unwrap(), (-1.0, 3.0));
        assert_eq!(vector_field(2.0, 0.5).unwrap(), (-1.5, 0.0));
        assert!(vector_field(0.0, 1.0).is_err());
    }

    #[test]
    fn trapping_membership() {
        assert!(in_trapping_region(4.0, 1.0 / 16.0));
        assert!(!in_trapping_region(2.0, 1.0));
        assert!(!in_trapping_region(0.5, 0.5));
        assert!(in_trapping_region(1.0, 1.0));
    }

    #[test]
    fn boundary_polynomial_values() {
        let p = boundary_polynomial();
        assert_eq!(p.eval_int(1), 0);
        assert_eq!(p.derivative().eval_int(1), 1);
        assert_eq!(p.eval_int(2), 37970);
        assert_eq!(p.eval_rational(3, 3), (0, 3i128.pow(13)));
    }

    #[test]
    fn reduced_derivative_matches_closed_form() {
        let r = verify_trapping_boundary(16).unwrap();
        let mut want = vec![0i64; 10];
        want[9] = 780;
        want[6] = -770;
        assert_eq!(r.second_factor, IntPoly(want));
    }

    #[test]
    fn boundary_needs_two_samples() {
        assert!(verify_trapping_boundary(1).is_err());
    }

    #[test]
    fn linearization_at_node() {
        let lin = linear_analysis();
        assert_eq!(lin.matrix, [[-1.0, 1.0], [-6.0, -6.0]]);
        assert_eq!(lin.eigenpairs[0], (-3.0, [1.0, -2.0]));
        assert_eq!(lin.eigenpairs[1], (-4.0, [1.0, -3.0]));
        assert!((lin.form_at_one - 2.0).abs() < 1e-12);
        assert!((lin.form_at_five_halves - 208.0 / 29.0).abs() < 1e-12);
        assert!(lin.form_monotone);
    }

    #[test]
    fn fit_recovers_an_exact_mode() {
        let states: Vec<PhaseState> = (0..=200)
            .map(|k| {
                let t = 2.5 + 3.0 * k as f64 / 200.0;
                let e = 2.0 * (-3.0 * t).exp();
                PhaseState { t, x: 1.0 + e, y: 1.0 - 2.0 * e }
            })
            .collect();
        let fit = fit_asymptotics_states(&states, (3.0, 5.0)).unwrap();
        assert!((fit.a - 2.0).abs() < 1e-8);
        assert!(fit.b.abs() < 1e-8);
    }

    #[test]
    fn fit_rejects_short_or_late_windows() {
        let states: Vec<PhaseState> = (0..=400)
            .map(|k| {
                let t = 20.0 * k as f64 / 400.0;
                let e = (-3.0 * t).exp();
                PhaseState { t, x: 1.0 + e, y: 1.0 - 2.0 * e }
            })
            .collect();
        assert!(matches!(fit_asymptotics_states(&states, (3.0, 3.5)), Err(Error::Fit(_))));
        assert!(matches!(fit_asymptotics_states(&states, (12.0, 14.0)), Err(Error::Fit(_))));
        assert!(matches!(fit_asymptotics_states(&states, (19.0, 21.0)), Err(Error::Fit(_))));
    }

    #[test]
    fn integrate_leaf_validates_arguments() {
        assert!(matches!(integrate_leaf(5.0, 1e-10), Err(Error::Domain(_))));
        assert!(matches!(integrate_leaf(50.0, 1e-3), Err(Error::Domain(_))));
    }
}
