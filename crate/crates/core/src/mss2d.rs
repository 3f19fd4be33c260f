//! Entire two-dimensional minimal graphs in `R^4` built from holomorphic
//! data, with finite-difference checks of the outer and inner variation
//! systems and of the Monge-Ampere potential behind them.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::quad::GaussLegendre;

pub const MAX_DEGREE: usize = 16;
/// Bound on `|Re H|` over the sampled domain.
pub const MAX_RE_H: f64 = 20.0;
pub const HOLOMORPHY_TOL: f64 = 1e-9;
const EXP_LIMIT: f64 = 700.0;
const SEGMENT_PIECE: f64 = 0.25;
const SHRINK: f64 = 0.8;

/// `H(z) = sum c_k z^k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolomorphicPoly {
    pub coeffs: Vec<Complex64>,
}

impl HolomorphicPoly {
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.len() > MAX_DEGREE + 1 {
            return Err(Error::Input(format!("need 1 to {} coefficients, got {}", MAX_DEGREE + 1, coeffs.len())));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Input("coefficients must be finite".into()));
        }
        Ok(Self { coeffs })
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![Complex64::new(0.0, 0.0)] }
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    }
}

/// `h^1 = (e^H + L e^{-H}) / 2`, `h^2 = (e^H - L e^{-H}) / (2i)`.
pub fn h_from_h_poly(poly: &HolomorphicPoly, big_lambda: f64, z: Complex64) -> Result<[Complex64; 2]> {
    let hz = poly.eval(z);
    if !(hz.re.abs() <= EXP_LIMIT) {
        return Err(Error::Range(format!("Re H = {} at z = {z} overflows the exponential", hz.re)));
    }
    let e = hz.exp();
    let f = big_lambda * (-hz).exp();
    Ok([(e + f) * 0.5, (e - f) / Complex64::new(0.0, 2.0)])
}

/// Rotation of the plane, stored as a matrix with orthonormal columns.
pub type Rotation = [[f64; 2]; 2];

pub fn rotation_from_angle(phi: f64) -> Rotation {
    let (s, c) = phi.sin_cos();
    [[c, -s], [s, c]]
}

fn check_rotation(q: &Rotation) -> Result<()> {
    let dot = |a: usize, b: usize| q[0][a] * q[0][b] + q[1][a] * q[1][b];
    let det = q[0][0] * q[1][1] - q[0][1] * q[1][0];
    if (dot(0, 0) - 1.0).abs() > 1e-12 || (dot(1, 1) - 1.0).abs() > 1e-12 || dot(0, 1).abs() > 1e-12 || det < 0.0 {
        return Err(Error::Input("rotation must be orthogonal with determinant one".into()));
    }
    Ok(())
}

/// Pointwise evaluation of the map `u(x) = u~(S Q x)`, `S = diag(l^{-1/2}, l^{1/2})`.
#[derive(Debug, Clone)]
pub struct MapEvaluator {
    pub poly: HolomorphicPoly,
    pub lambda: f64,
    pub big_lambda: f64,
    pub rotation: Rotation,
    gl: GaussLegendre,
}

impl MapEvaluator {
    pub fn new(poly: HolomorphicPoly, lambda: f64, rotation: Rotation) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Input(format!("lambda must be positive, got {lambda}")));
        }
        check_rotation(&rotation)?;
        Ok(Self { poly, lambda, big_lambda: lambda - 1.0 / lambda, rotation, gl: GaussLegendre::new(16) })
    }

    /// Point of the `u~` plane that `x` is read from.
    pub fn source_point(&self, x: [f64; 2]) -> Complex64 {
        let q = &self.rotation;
        let y0 = q[0][0] * x[0] + q[0][1] * x[1];
        let y1 = q[1][0] * x[0] + q[1][1] * x[1];
        let r = self.lambda.sqrt();
        Complex64::new(y0 / r, y1 * r)
    }

    /// `int h` along the segment `[a, b]`.
    fn segment(&self, a: Complex64, b: Complex64) -> Result<[Complex64; 2]> {
        let len = (b - a).norm();
        let pieces = ((len / SEGMENT_PIECE).ceil() as usize).max(1);
        let mut acc = [Complex64::new(0.0, 0.0); 2];
        let step = (b - a) / pieces as f64;
        for p in 0..pieces {
            let z0 = a + step * p as f64;
            for (x, w) in self.gl.nodes().iter().zip(self.gl.weights()) {
                let z = z0 + step * (0.5 * (x + 1.0));
                let h = h_from_h_poly(&self.poly, self.big_lambda, z)?;
                acc[0] += h[0] * (0.5 * w);
                acc[1] += h[1] * (0.5 * w);
            }
        }
        Ok([acc[0] * step, acc[1] * step])
    }

    /// `u~(w) = Im int_0^w h` along the axis-first path and the straight
    /// path; returns the first together with the discrepancy.
    pub fn tilde_u(&self, w: Complex64) -> Result<([f64; 2], f64)> {
        let zero = Complex64::new(0.0, 0.0);
        let corner = Complex64::new(w.re, 0.0);
        let a1 = self.segment(zero, corner)?;
        let a2 = self.segment(corner, w)?;
        let b = self.segment(zero, w)?;
        let ua = [(a1[0] + a2[0]).im, (a1[1] + a2[1]).im];
        let ub = [b[0].im, b[1].im];
        let scale = ua[0].abs().max(ua[1].abs()).max(1.0);
        let gap = (ua[0] - ub[0]).abs().max((ua[1] - ub[1]).abs()) / scale;
        if !(gap <= HOLOMORPHY_TOL) {
            return Err(Error::Holomorphy { discrepancy: gap });
        }
        Ok((ua, gap))
    }

    pub fn eval(&self, x: [f64; 2]) -> Result<[f64; 2]> {
        Ok(self.tilde_u(self.source_point(x))?.0)
    }
}

/// `sqrt(det g) g^{-1}` of the generated map: `Q^T diag(l, 1/l) Q`.
pub fn expected_metric_density(lambda: f64, q: &Rotation) -> [[f64; 2]; 2] {
    let d = [lambda, 1.0 / lambda];
    let mut out = [[0.0; 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..2).map(|k| q[k][i] * d[k] * q[k][j]).sum();
        }
    }
    out
}

/// Map values `u: R^2 -> R^m` at the nodes of a uniform grid on `[-L, L]^2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapGrid {
    pub half_width: f64,
    pub nodes: usize,
    pub m: usize,
    /// `values[(j * nodes + i) * m + alpha]` at `(x_i, x_j)`.
    pub values: Vec<f64>,
}

impl MapGrid {
    pub fn sample<F: FnMut([f64; 2]) -> Result<Vec<f64>>>(half_width: f64, nodes: usize, m: usize, mut f: F) -> Result<Self> {
        if !(half_width > 0.0) || nodes < 5 || m == 0 {
            return Err(Error::Input(format!(
                "grid needs L > 0, at least 5 nodes and m >= 1, got ({half_width}, {nodes}, {m})"
            )));
        }
        let mut values = Vec::with_capacity(nodes * nodes * m);
        let spacing = 2.0 * half_width / (nodes - 1) as f64;
        for j in 0..nodes {
            for i in 0..nodes {
                let x = [-half_width + spacing * i as f64, -half_width + spacing * j as f64];
                let v = f(x)?;
                if v.len() != m {
                    return Err(Error::Input(format!("map returned {} components, expected {m}", v.len())));
                }
                values.extend(v);
            }
        }
        Ok(Self { half_width, nodes, m, values })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.nodes - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + self.spacing() * i as f64
    }

    pub fn value(&self, i: usize, j: usize, alpha: usize) -> f64 {
        self.values[(j * self.nodes + i) * self.m + alpha]
    }

    /// Adds `amplitude * x1^3` to the first component.
    pub fn perturbed(&self, amplitude: f64) -> Self {
        let mut out = self.clone();
        for j in 0..self.nodes {
            for i in 0..self.nodes {
                let x = self.coord(i);
                out.values[(j * self.nodes + i) * self.m] += amplitude * x * x * x;
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x1,x2");
        for a in 0..self.m {
            out.push_str(&format!(",u{}", a + 1));
        }
        out.push('\n');
        for j in 0..self.nodes {
            for i in 0..self.nodes {
                out.push_str(&format!("{},{}", self.coord(i), self.coord(j)));
                for a in 0..self.m {
                    out.push_str(&format!(",{}", self.value(i, j, a)));
                }
                out.push('\n');
            }
        }
        out
    }

    /// Centered `(du/dx1, du/dx2)` per component at an interior node.
    fn gradient(&self, i: usize, j: usize) -> Vec<[f64; 2]> {
        let h2 = 2.0 * self.spacing();
        (0..self.m)
            .map(|a| {
                [
                    (self.value(i + 1, j, a) - self.value(i - 1, j, a)) / h2,
                    (self.value(i, j + 1, a) - self.value(i, j - 1, a)) / h2,
                ]
            })
            .collect()
    }

    /// `sqrt(det g) g^{-1}` from centered differences at an interior node.
    pub fn metric_density(&self, i: usize, j: usize) -> [[f64; 2]; 2] {
        let du = self.gradient(i, j);
        let mut g = [[1.0, 0.0], [0.0, 1.0]];
        for d in &du {
            g[0][0] += d[0] * d[0];
            g[0][1] += d[0] * d[1];
            g[1][1] += d[1] * d[1];
        }
        g[1][0] = g[0][1];
        let det = g[0][0] * g[1][1] - g[0][1] * g[0][1];
        let s = det.sqrt() / det;
        [[s * g[1][1], -s * g[0][1]], [-s * g[1][0], s * g[0][0]]]
    }

    /// Nodes at distance at least `margin` from the boundary.
    fn window(&self, margin: f64) -> Result<std::ops::Range<usize>> {
        let h = self.spacing();
        if !(margin >= 2.0 * h * (1.0 - 1e-12)) {
            return Err(Error::Input(format!("margin {margin} is below two grid steps ({})", 2.0 * h)));
        }
        let k = (margin / h - 1e-9).ceil() as usize;
        if 2 * k >= self.nodes {
            return Err(Error::Input(format!("margin {margin} leaves no interior nodes")));
        }
        Ok(k..self.nodes - k)
    }

    fn density_field(&self) -> Vec<[[f64; 2]; 2]> {
        let n = self.nodes;
        let mut out = vec![[[f64::NAN; 2]; 2]; n * n];
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                out[j * n + i] = self.metric_density(i, j);
            }
        }
        out
    }
}

/// `max |d_i (sqrt(det g) g^{ij} d_j u^a)|` over nodes at least `margin` from
/// the boundary, with centered differences throughout.
pub fn residual_outer(grid: &MapGrid, margin: f64) -> Result<f64> {
    let window = grid.window(margin)?;
    let n = grid.nodes;
    let a = grid.density_field();
    let h2 = 2.0 * grid.spacing();
    let mut flux = vec![[0.0; 2]; n * n * grid.m];
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            let du = grid.gradient(i, j);
            let d = &a[j * n + i];
            for (alpha, g) in du.iter().enumerate() {
                flux[(j * n + i) * grid.m + alpha] =
                    [d[0][0] * g[0] + d[0][1] * g[1], d[1][0] * g[0] + d[1][1] * g[1]];
            }
        }
    }
    let mut worst = 0.0_f64;
    for j in window.clone() {
        for i in window.clone() {
            for alpha in 0..grid.m {
                let f = |ii: usize, jj: usize| flux[(jj * n + ii) * grid.m + alpha];
                let div = (f(i + 1, j)[0] - f(i - 1, j)[0]) / h2 + (f(i, j + 1)[1] - f(i, j - 1)[1]) / h2;
                worst = worst.max(div.abs());
            }
        }
    }
    Ok(worst)
}

/// Row-wise divergence of `sqrt(det g) g^{-1}`, maximum over the window.
pub fn residual_inner(grid: &MapGrid, margin: f64) -> Result<f64> {
    let window = grid.window(margin)?;
    let n = grid.nodes;
    let a = grid.density_field();
    let h2 = 2.0 * grid.spacing();
    let mut worst = 0.0_f64;
    for j in window.clone() {
        for i in window.clone() {
            for row in 0..2 {
                let div = (a[j * n + i + 1][row][0] - a[j * n + i - 1][row][0]) / h2
                    + (a[(j + 1) * n + i][row][1] - a[(j - 1) * n + i][row][1]) / h2;
                worst = worst.max(div.abs());
            }
        }
    }
    Ok(worst)
}

/// `max |sqrt(det g) g^{-1} - expected|` (entrywise) over the window.
pub fn density_deviation(grid: &MapGrid, margin: f64, expected: [[f64; 2]; 2]) -> Result<f64> {
    let window = grid.window(margin)?;
    let mut worst = 0.0_f64;
    for j in window.clone() {
        for i in window.clone() {
            let d = grid.metric_density(i, j);
            for r in 0..2 {
                for c in 0..2 {
                    worst = worst.max((d[r][c] - expected[r][c]).abs());
                }
            }
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JorgensReduction {
    pub samples: usize,
    /// `max |det D^2 Phi - 1|`.
    pub max_det_deviation: f64,
    /// Smallest eigenvalue of `D^2 Phi` seen.
    pub min_eigenvalue: f64,
    /// For scalar maps: `max |eigenvalues - (W, 1/W)|`, `W = sqrt(1 + |Du|^2)`.
    pub scalar_eigen_mismatch: Option<f64>,
    pub positive: bool,
    pub passed: bool,
}

fn sym_eigen(m: [[f64; 2]; 2]) -> [f64; 2] {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = ((m[0][0] - m[1][1]).powi(2) / 4.0 + m[0][1] * m[1][0]).max(0.0).sqrt();
    let hi = tr / 2.0 + disc;
    // det / hi keeps the small root accurate.
    [hi, if hi != 0.0 { det / hi } else { tr / 2.0 - disc }]
}

/// `D^2 Phi = -J (sqrt(det g) g^{-1}) J` at the window nodes, with
/// `J = [[0, -1], [1, 0]]`.
pub fn jorgens_reduction(grid: &MapGrid, margin: f64, det_tol: f64) -> Result<JorgensReduction> {
    let window = grid.window(margin)?;
    let mut samples = 0;
    let mut max_det_deviation = 0.0_f64;
    let mut min_eigenvalue = f64::INFINITY;
    let mut mismatch = 0.0_f64;
    for j in window.clone() {
        for i in window.clone() {
            let a = grid.metric_density(i, j);
            // -J A J = [[a11, -a10], [-a01, a00]].
            let phi = [[a[1][1], -a[1][0]], [-a[0][1], a[0][0]]];
            let det = phi[0][0] * phi[1][1] - phi[0][1] * phi[1][0];
            let ev = sym_eigen(phi);
            max_det_deviation = max_det_deviation.max((det - 1.0).abs());
            min_eigenvalue = min_eigenvalue.min(ev[1]);
            if grid.m == 1 {
                let g = grid.gradient(i, j)[0];
                let w = (1.0 + g[0] * g[0] + g[1] * g[1]).sqrt();
                let ea = sym_eigen(a);
                mismatch = mismatch.max((ea[0] - w).abs()).max((ea[1] - 1.0 / w).abs());
            }
            samples += 1;
        }
    }
    let positive = min_eigenvalue > 0.0;
    Ok(JorgensReduction {
        samples,
        max_det_deviation,
        min_eigenvalue,
        scalar_eigen_mismatch: (grid.m == 1).then_some(mismatch),
        positive,
        passed: positive && max_det_deviation <= det_tol,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Mss2dSolution {
    pub lambda: f64,
    pub big_lambda: f64,
    pub rotation: Rotation,
    /// Half width after clamping so that `|Re H| <= MAX_RE_H` on the grid.
    pub half_width: f64,
    pub grid: MapGrid,
    /// `max |sum (h^a)^2 - L|` over the grid.
    pub quadratic_defect: f64,
    /// Same, relative to `max(1, sum |h^a|^2)`.
    pub quadratic_defect_relative: f64,
    /// Largest relative disagreement of the two integration paths.
    pub path_discrepancy: f64,
}

impl Mss2dSolution {
    pub fn expected_metric_density(&self) -> [[f64; 2]; 2] {
        expected_metric_density(self.lambda, &self.rotation)
    }
}

/// Samples `u` on `nodes^2` nodes of `[-L, L]^2`, shrinking `L` until
/// `|Re H| <= MAX_RE_H` at every source point.
pub fn generate_solution(
    poly: &HolomorphicPoly,
    lambda: f64,
    rotation: Rotation,
    half_width: f64,
    nodes: usize,
) -> Result<Mss2dSolution> {
    let eval = MapEvaluator::new(poly.clone(), lambda, rotation)?;
    if !(half_width > 0.0) || !half_width.is_finite() || nodes < 5 {
        return Err(Error::Input(format!("need L > 0 and at least 5 nodes, got ({half_width}, {nodes})")));
    }
    let mut l = half_width;
    let mut shrinks = 0;
    loop {
        let sp = 2.0 * l / (nodes - 1) as f64;
        let mut worst = 0.0_f64;
        for j in 0..nodes {
            for i in 0..nodes {
                let w = eval.source_point([-l + sp * i as f64, -l + sp * j as f64]);
                worst = worst.max(poly.eval(w).re.abs());
            }
        }
        if worst <= MAX_RE_H {
            break;
        }
        shrinks += 1;
        if shrinks > 200 {
            return Err(Error::Range("cannot clamp the domain to |Re H| <= 20".into()));
        }
        l *= SHRINK;
    }
    let mut quadratic_defect = 0.0_f64;
    let mut quadratic_defect_relative = 0.0_f64;
    let mut path_discrepancy = 0.0_f64;
    let grid = MapGrid::sample(l, nodes, 2, |x| {
        let w = eval.source_point(x);
        let h = h_from_h_poly(poly, eval.big_lambda, w)?;
        let d = (h[0] * h[0] + h[1] * h[1] - eval.big_lambda).norm();
        quadratic_defect = quadratic_defect.max(d);
        quadratic_defect_relative = quadratic_defect_relative.max(d / (h[0].norm_sqr() + h[1].norm_sqr()).max(1.0));
        let (u, gap) = eval.tilde_u(w)?;
        path_discrepancy = path_discrepancy.max(gap);
        Ok(u.to_vec())
    })?;
    Ok(Mss2dSolution {
        lambda,
        big_lambda: eval.big_lambda,
        rotation,
        half_width: l,
        grid,
        quadratic_defect,
        quadratic_defect_relative,
        path_discrepancy,
    })
}

/// Scherk's surface `log(cos x2 / cos x1)`, a scalar minimal graph on the
/// square `|x1|, |x2| < pi/2`.
pub fn scherk_height(x: [f64; 2]) -> Result<f64> {
    let (c1, c2) = (x[0].cos(), x[1].cos());
    if !(c1 > 0.0 && c2 > 0.0) {
        return Err(Error::Domain(format!("Scherk graph undefined at {x:?}")));
    }
    Ok((c2 / c1).ln())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementStudy {
    pub nodes: Vec<usize>,
    pub spacing: Vec<f64>,
    pub outer: Vec<f64>,
    pub inner: Vec<f64>,
    pub density: Vec<f64>,
    pub outer_orders: Vec<f64>,
    pub inner_orders: Vec<f64>,
}

fn orders(v: &[f64]) -> Vec<f64> {
    v.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Residuals on successively doubled grids, all measured on the nodes of the
/// coarsest window.
pub fn refinement_study(grids: &[MapGrid], expected: [[f64; 2]; 2]) -> Result<RefinementStudy> {
    if grids.len() < 2 {
        return Err(Error::Input("need at least two grids".into()));
    }
    let margin = 2.0 * grids[0].spacing();
    let mut s = RefinementStudy {
        nodes: vec![],
        spacing: vec![],
        outer: vec![],
        inner: vec![],
        density: vec![],
        outer_orders: vec![],
        inner_orders: vec![],
    };
    for g in grids {
        s.nodes.push(g.nodes);
        s.spacing.push(g.spacing());
        s.outer.push(residual_outer(g, margin)?);
        s.inner.push(residual_inner(g, margin)?);
        s.density.push(density_deviation(g, margin, expected)?);
    }
    s.outer_orders = orders(&s.outer);
    s.inner_orders = orders(&s.inner);
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn constant_data_example() {
        let h = h_from_h_poly(&HolomorphicPoly::zero(), 1.5, c(0.3, -0.7)).unwrap();
        assert!((h[0] - c(1.25, 0.0)).norm() < 1e-15);
        assert!((h[1] - c(0.0, 0.25)).norm() < 1e-15);
        assert!((h[0] * h[0] + h[1] * h[1] - c(1.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn holomorphic_case_is_null() {
        let p = HolomorphicPoly::new(vec![c(0.1, 0.2), c(1.0, -0.5)]).unwrap();
        let h = h_from_h_poly(&p, 0.0, c(0.4, 0.9)).unwrap();
        assert!((h[0] * h[0] + h[1] * h[1]).norm() < 1e-14);
    }

    #[test]
    fn overflow_is_a_range_error() {
        let p = HolomorphicPoly::new(vec![c(800.0, 0.0)]).unwrap();
        assert!(matches!(h_from_h_poly(&p, 1.0, c(0.0, 0.0)), Err(Error::Range(_))));
    }

    #[test]
    fn linear_map_has_zero_residuals() {
        let g = MapGrid::sample(1.0, 17, 2, |x| Ok(vec![2.0 * x[0] - x[1], 0.5 * x[1] + 3.0])).unwrap();
        let m = 2.0 * g.spacing();
        assert!(residual_outer(&g, m).unwrap() < 1e-12);
        assert!(residual_inner(&g, m).unwrap() < 1e-12);
        let r = jorgens_reduction(&g, m, 1e-8).unwrap();
        assert!(r.passed);
    }

    #[test]
    fn margin_must_cover_the_stencil() {
        let g = MapGrid::sample(1.0, 17, 1, |x| Ok(vec![x[0]])).unwrap();
        assert!(residual_outer(&g, g.spacing()).is_err());
    }

    #[test]
    fn rejects_reflections() {
        let r = [[1.0, 0.0], [0.0, -1.0]];
        assert!(MapEvaluator::new(HolomorphicPoly::zero(), 2.0, r).is_err());
    }
}
