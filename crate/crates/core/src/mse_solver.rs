//! Dirichlet problem for the minimal surface equation on the ball `B_R` of
//! R^8, restricted to functions of `(s, t) = (|x|, |y|)` that are odd under
//! `s <-> t`. In the reduced plane the equation reads
//! `∂_s(s^3 t^3 u_s / W) + ∂_t(s^3 t^3 u_t / W) = 0`, `W = sqrt(1 + u_s^2 + u_t^2)`,
//! and only the half `t > s` of the quarter disk is solved for.
//!
//! Cell-centered finite volumes on the square `[0, R]^2`. Diagonal cells are
//! pinned to zero, the axis `s = 0` has zero flux through the weight, and the
//! arc enters as an immersed Dirichlet condition with shortened arms.

use serde::Serialize;

use crate::barriers::{BarrierSpec, LogValue, ReducedPoint};
use crate::error::{Error, Result};
use crate::numerics::banded::BandMatrix;

const MIN_ARM: f64 = 1e-3;
const MAX_INCREASES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Target for the weighted max-norm of the nonlinear residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Relaxation of the Picard update.
    pub damping: f64,
    /// Newton steps are tried once the residual is below this; Picard
    /// steps are the fallback. Zero gives a pure Picard iteration.
    pub newton_switch: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol: 1e-8, max_iter: 500, damping: 0.7, newton_switch: 1e3 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol >= 1e-14) {
            return Err(Error::Input(format!("solver tolerance must be at least 1e-14, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Input("max_iter must be positive".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Input(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if !(self.newton_switch >= 0.0) {
            return Err(Error::Input(format!("newton_switch must be nonnegative, got {}", self.newton_switch)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Cell {
    Unknown(usize),
    Diagonal,
    /// Center outside the disk; holds boundary data.
    Outside,
    Below,
}

/// A face of an unknown cell that ends on the arc.
#[derive(Debug, Clone, Copy)]
struct ArcFace {
    arm: f64,
    value: f64,
}

/// Discrete solution on the cell-centered grid of `[0, R]^2`.
#[derive(Debug, Clone, Serialize)]
pub struct SymmetricGrid {
    pub r: f64,
    pub h: f64,
    pub n: usize,
    /// Cell values on the full square in row-major order `j * n + i`,
    /// odd across the diagonal. Outside cells next to the arc hold the data,
    /// the rest are NaN.
    pub values: Vec<f64>,
    pub unknowns: usize,
    pub residual: f64,
    pub residual_history: Vec<f64>,
    pub iterations: usize,
    pub newton_steps: usize,
}

impl SymmetricGrid {
    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.n + i]
    }

    /// Whether the cell center lies in `{t >= s}` inside the disk.
    pub fn in_domain(&self, i: usize, j: usize) -> bool {
        let (s, t) = (self.center(i), self.center(j));
        j >= i && s * s + t * t < self.r * self.r
    }

    /// Largest `|u|` over the cells of the domain.
    pub fn max_abs(&self) -> f64 {
        let mut m: f64 = 0.0;
        for j in 0..self.n {
            for i in 0..=j {
                if self.in_domain(i, j) {
                    m = m.max(self.value(i, j).abs());
                }
            }
        }
        m
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,t,u\n");
        for j in 0..self.n {
            for i in 0..=j {
                if self.in_domain(i, j) {
                    out.push_str(&format!("{},{},{}\n", self.center(i), self.center(j), self.value(i, j)));
                }
            }
        }
        out
    }

    /// `max |u_h - mean of the four fine cells|` over coarse domain cells
    /// whose children all lie in the fine domain.
    pub fn refinement_difference(&self, fine: &SymmetricGrid) -> Result<f64> {
        if fine.n != 2 * self.n || (fine.r - self.r).abs() > 1e-12 * self.r {
            return Err(Error::Input("refinement needs the same radius and half the spacing".into()));
        }
        let mut m: f64 = 0.0;
        for j in 0..self.n {
            for i in 0..=j {
                if !self.in_domain(i, j) {
                    continue;
                }
                let kids = [(2 * i, 2 * j), (2 * i + 1, 2 * j), (2 * i, 2 * j + 1), (2 * i + 1, 2 * j + 1)];
                let inside = kids.iter().all(|&(a, b)| {
                    let (s, t) = (fine.center(a), fine.center(b));
                    s * s + t * t < fine.r * fine.r
                });
                if !inside {
                    continue;
                }
                let mean = kids.iter().map(|&(a, b)| fine.value(a, b)).sum::<f64>() / 4.0;
                m = m.max((self.value(i, j) - mean).abs());
            }
        }
        Ok(m)
    }
}

struct Problem {
    h: f64,
    n: usize,
    cells: Vec<Cell>,
    /// Index `(i, j)` of each unknown.
    order: Vec<(usize, usize)>,
    /// Values on the extended square `-1..=n` in both directions.
    ext_data: Vec<f64>,
    east: Vec<Option<ArcFace>>,
    north: Vec<Option<ArcFace>>,
    kl: usize,
}

impl Problem {
    fn ext_index(&self, i: isize, j: isize) -> usize {
        ((j + 1) as usize) * (self.n + 2) + (i + 1) as usize
    }

    fn center(&self, i: isize) -> f64 {
        (i as f64 + 0.5) * self.h
    }

    fn cell(&self, i: usize, j: usize) -> Cell {
        self.cells[j * self.n + i]
    }

    fn new<B: Fn(f64, f64) -> Result<f64>>(r: f64, h: f64, boundary: &B) -> Result<Self> {
        if !(r > 0.0 && h > 0.0) {
            return Err(Error::Input(format!("need R > 0 and h > 0, got ({r}, {h})")));
        }
        let ratio = r / h;
        let n = ratio.round() as usize;
        if (ratio - n as f64).abs() > 1e-9 * ratio || n < 32 {
            return Err(Error::Input(format!("h must divide R into at least 32 cells, got R/h = {ratio}")));
        }
        let center = |i: usize| (i as f64 + 0.5) * h;
        let mut cells = vec![Cell::Below; n * n];
        let mut order = vec![];
        for j in 0..n {
            for i in 0..n {
                let (s, t) = (center(i), center(j));
                cells[j * n + i] = if i > j {
                    Cell::Below
                } else if s * s + t * t >= r * r {
                    Cell::Outside
                } else if i == j {
                    Cell::Diagonal
                } else {
                    order.push((i, j));
                    Cell::Unknown(order.len() - 1)
                };
            }
        }
        let mut p = Problem {
            h,
            n,
            cells,
            order,
            ext_data: vec![f64::NAN; (n + 2) * (n + 2)],
            east: vec![],
            north: vec![],
            kl: 0,
        };

        // Data on the outside cells that some unknown reads, and on the arc.
        let mut need = vec![false; (n + 2) * (n + 2)];
        for &(i, j) in &p.order {
            for dj in -1..=1isize {
                for di in -1..=1isize {
                    let (a, b) = (i as isize + di, j as isize + dj);
                    if a < 0 || b < 0 {
                        continue;
                    }
                    let (a, b) = if a > b { (b, a) } else { (a, b) };
                    let outside = a as usize >= n
                        || b as usize >= n
                        || matches!(p.cell(a as usize, b as usize), Cell::Outside);
                    if outside {
                        need[p.ext_index(a, b)] = true;
                    }
                }
            }
        }
        for b in -1..=(n as isize) {
            for a in -1..=(n as isize) {
                let k = p.ext_index(a, b);
                if need[k] {
                    p.ext_data[k] = boundary(p.center(a), p.center(b))?;
                }
            }
        }

        let mut east = vec![None; p.order.len()];
        let mut north = vec![None; p.order.len()];
        for (k, &(i, j)) in p.order.iter().enumerate() {
            let (s, t) = (center(i), center(j));
            let crosses = |a: usize, b: usize| a >= n || b >= n || matches!(p.cell(a, b), Cell::Outside);
            if crosses(i + 1, j) {
                let edge = (r * r - t * t).sqrt();
                let arm = ((edge - s) / h).max(MIN_ARM) * h;
                east[k] = Some(ArcFace { arm, value: boundary(s + arm, t)? });
            }
            if crosses(i, j + 1) {
                let edge = (r * r - s * s).sqrt();
                let arm = ((edge - t) / h).max(MIN_ARM) * h;
                north[k] = Some(ArcFace { arm, value: boundary(s, t + arm)? });
            }
        }
        p.east = east;
        p.north = north;

        // Bandwidth of the 3x3 stencil in unknown numbering.
        let mut kl = 0;
        for (k, &(i, j)) in p.order.iter().enumerate() {
            for dj in -1..=1isize {
                for di in -1..=1isize {
                    if let Some(q) = p.unknown_at(i as isize + di, j as isize + dj) {
                        kl = kl.max(k.abs_diff(q));
                    }
                }
            }
        }
        p.kl = kl;
        Ok(p)
    }

    /// Unknown index read at `(i, j)` after the reflections, if any.
    fn unknown_at(&self, i: isize, j: isize) -> Option<usize> {
        let i = if i < 0 { -i - 1 } else { i };
        if j < 0 || i as usize >= self.n || j as usize >= self.n {
            return None;
        }
        let (a, b) = if i > j { (j as usize, i as usize) } else { (i as usize, j as usize) };
        match self.cell(a, b) {
            Cell::Unknown(k) => Some(k),
            _ => None,
        }
    }

    /// Fills the extended square from the unknown vector.
    fn extend(&self, u: &[f64], ext: &mut Vec<f64>) {
        ext.clear();
        ext.extend_from_slice(&self.ext_data);
        let n = self.n as isize;
        for j in -1..=n {
            for i in -1..=n {
                let k = self.ext_index(i, j);
                let ii = if i < 0 { -i - 1 } else { i };
                if j < 0 {
                    continue;
                }
                let (a, b, sign) = if ii > j { (j, ii, -1.0) } else { (ii, j, 1.0) };
                if b >= n {
                    ext[k] = sign * self.ext_data[self.ext_index(a, b)];
                    continue;
                }
                ext[k] = match self.cell(a as usize, b as usize) {
                    Cell::Unknown(q) => sign * u[q],
                    Cell::Diagonal => 0.0,
                    Cell::Outside => sign * self.ext_data[self.ext_index(a, b)],
                    Cell::Below => unreachable!(),
                };
            }
        }
    }

    /// Face fluxes of unknown `k` as `(coefficient, neighbor value)` pairs per
    /// direction E, W, N, S, with the arm-averaged denominators applied.
    fn faces(&self, k: usize, ext: &[f64]) -> [(f64, f64); 4] {
        let (i, j) = self.order[k];
        let (ii, jj) = (i as isize, j as isize);
        let h = self.h;
        let v = |a: isize, b: isize| ext[self.ext_index(a, b)];
        let up = v(ii, jj);
        let (s, t) = (self.center(ii), self.center(jj));

        let arm_e = self.east[k].map_or(h, |f| f.arm);
        let arm_n = self.north[k].map_or(h, |f| f.arm);
        let den_s = 0.5 * (arm_e + h);
        let den_t = 0.5 * (arm_n + h);

        let coef = |sm: f64, tm: f64, gn: f64, gt: f64, arm: f64, den: f64| {
            let w = (1.0 + gn * gn + gt * gt).sqrt();
            (sm * tm).powi(3) / (w * arm * den)
        };

        // East.
        let e = match self.east[k] {
            Some(f) => {
                let gn = (f.value - up) / f.arm;
                let gt = (v(ii, jj + 1) - v(ii, jj - 1)) / (2.0 * h);
                (coef(s + 0.5 * f.arm, t, gn, gt, f.arm, den_s), f.value)
            }
            None => {
                let un = v(ii + 1, jj);
                let gn = (un - up) / h;
                let gt = (v(ii, jj + 1) + v(ii + 1, jj + 1) - v(ii, jj - 1) - v(ii + 1, jj - 1)) / (4.0 * h);
                (coef(s + 0.5 * h, t, gn, gt, h, den_s), un)
            }
        };
        // West: the weight vanishes on the axis.
        let w = if i == 0 {
            (0.0, up)
        } else {
            let un = v(ii - 1, jj);
            let gn = (un - up) / h;
            let gt = (v(ii, jj + 1) + v(ii - 1, jj + 1) - v(ii, jj - 1) - v(ii - 1, jj - 1)) / (4.0 * h);
            (coef(s - 0.5 * h, t, gn, gt, h, den_s), un)
        };
        let nth = match self.north[k] {
            Some(f) => {
                let gn = (f.value - up) / f.arm;
                let gt = (v(ii + 1, jj) - v(ii - 1, jj)) / (2.0 * h);
                (coef(s, t + 0.5 * f.arm, gn, gt, f.arm, den_t), f.value)
            }
            None => {
                let un = v(ii, jj + 1);
                let gn = (un - up) / h;
                let gt = (v(ii + 1, jj) + v(ii + 1, jj + 1) - v(ii - 1, jj) - v(ii - 1, jj + 1)) / (4.0 * h);
                (coef(s, t + 0.5 * h, gn, gt, h, den_t), un)
            }
        };
        let sth = {
            let un = v(ii, jj - 1);
            let gn = (un - up) / h;
            let gt = (v(ii + 1, jj) + v(ii + 1, jj - 1) - v(ii - 1, jj) - v(ii - 1, jj - 1)) / (4.0 * h);
            (coef(s, t - 0.5 * h, gn, gt, h, den_t), un)
        };
        [e, w, nth, sth]
    }

    fn scale(&self, k: usize) -> f64 {
        let (i, j) = self.order[k];
        (self.center(i as isize) * self.center(j as isize)).powi(3)
    }

    /// Weighted residual `div(flux) / (s^3 t^3)` per unknown.
    fn residual(&self, u: &[f64], ext: &mut Vec<f64>, out: &mut [f64]) {
        self.extend(u, ext);
        for k in 0..self.order.len() {
            let faces = self.faces(k, ext);
            let mut acc = 0.0;
            for (c, un) in faces {
                acc += c * (un - u[k]);
            }
            out[k] = acc / self.scale(k);
        }
    }

    /// Picard matrix with coefficients frozen at `u`, and its right-hand side.
    fn picard_system(&self, u: &[f64], ext: &mut Vec<f64>) -> (BandMatrix, Vec<f64>) {
        self.extend(u, ext);
        let m = self.order.len();
        let mut a = BandMatrix::zeros(m, self.kl, self.kl);
        let mut rhs = vec![0.0; m];
        for k in 0..m {
            let (i, j) = self.order[k];
            let faces = self.faces(k, ext);
            let sc = self.scale(k);
            let nbrs = [(1isize, 0isize), (-1, 0), (0, 1), (0, -1)];
            for (d, (c, un)) in faces.iter().enumerate() {
                let c = c / sc;
                a.add(k, k, -c);
                let arc = (d == 0 && self.east[k].is_some()) || (d == 2 && self.north[k].is_some());
                let q = if arc { None } else { self.unknown_at(i as isize + nbrs[d].0, j as isize + nbrs[d].1) };
                match q {
                    Some(q) if q != k => a.add(k, q, c),
                    Some(_) => a.add(k, k, c),
                    None => rhs[k] -= c * un,
                }
            }
        }
        (a, rhs)
    }

    /// Finite-difference Jacobian of the residual with 9-color grouping.
    fn jacobian(&self, u: &[f64], r0: &[f64], ext: &mut Vec<f64>) -> BandMatrix {
        let m = self.order.len();
        let mut jac = BandMatrix::zeros(m, self.kl, self.kl);
        let mut up = u.to_vec();
        let mut r1 = vec![0.0; m];
        let deltas: Vec<f64> = u.iter().map(|x| 1e-7 * (1.0 + x.abs())).collect();
        for color in 0..9 {
            let (ci, cj) = (color % 3, color / 3);
            let mut any = false;
            for (q, &(i, j)) in self.order.iter().enumerate() {
                if i % 3 == ci && j % 3 == cj {
                    up[q] = u[q] + deltas[q];
                    any = true;
                }
            }
            if !any {
                continue;
            }
            self.residual(&up, ext, &mut r1);
            for (k, &(i, j)) in self.order.iter().enumerate() {
                let mut seen = [usize::MAX; 9];
                let mut ns = 0;
                for dj in -1..=1isize {
                    for di in -1..=1isize {
                        let Some(q) = self.unknown_at(i as isize + di, j as isize + dj) else { continue };
                        let (qi, qj) = self.order[q];
                        if qi % 3 != ci || qj % 3 != cj || seen[..ns].contains(&q) {
                            continue;
                        }
                        seen[ns] = q;
                        ns += 1;
                        jac.add(k, q, (r1[k] - r0[k]) / deltas[q]);
                    }
                }
            }
            for (q, &(i, j)) in self.order.iter().enumerate() {
                if i % 3 == ci && j % 3 == cj {
                    up[q] = u[q];
                }
            }
        }
        jac
    }

    fn full_values(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut ext = vec![];
        self.extend(u, &mut ext);
        let mut out = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                out[j * n + i] = ext[self.ext_index(i as isize, j as isize)];
            }
        }
        out
    }
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves the reduced Dirichlet problem on the disk of radius `r` with cell
/// size `h`; `boundary(s, t)` supplies the data on the arc and the initial
/// iterate in the interior.
pub fn dirichlet_solve<B: Fn(f64, f64) -> Result<f64>>(
    r: f64,
    h: f64,
    boundary: B,
    cfg: &SolverConfig,
) -> Result<SymmetricGrid> {
    cfg.validate()?;
    if !(h <= r / 32.0 * (1.0 + 1e-12)) {
        return Err(Error::Input(format!("h = {h} exceeds R/32 = {}", r / 32.0)));
    }
    let p = Problem::new(r, h, &boundary)?;
    let m = p.order.len();
    let mut u = Vec::with_capacity(m);
    for &(i, j) in &p.order {
        u.push(boundary(p.center(i as isize), p.center(j as isize))?);
    }
    let mut ext = vec![];
    let mut res = vec![0.0; m];
    p.residual(&u, &mut ext, &mut res);
    let mut norm = max_norm(&res);
    let mut history = vec![norm];
    let mut increases = 0usize;
    let mut newton_steps = 0usize;
    let mut iterations = 0usize;

    let fail = |reason: String, iterations: usize, history: &[f64], u: &[f64]| Error::Solver {
        reason,
        iterations,
        residual_history: history.to_vec(),
        iterate: p.full_values(u),
    };

    while norm > cfg.tol {
        if iterations >= cfg.max_iter {
            return Err(fail(format!("residual {norm:e} above {:e} after max_iter", cfg.tol), iterations, &history, &u));
        }
        iterations += 1;

        let mut candidate = None;
        if norm < cfg.newton_switch {
            let mut jac = p.jacobian(&u, &res, &mut ext);
            if jac.factorize().is_ok() {
                let mut step: Vec<f64> = res.iter().map(|x| -x).collect();
                jac.solve(&mut step);
                let mut lambda = 1.0;
                for _ in 0..8 {
                    let trial: Vec<f64> = u.iter().zip(&step).map(|(a, d)| a + lambda * d).collect();
                    let mut r_trial = vec![0.0; m];
                    p.residual(&trial, &mut ext, &mut r_trial);
                    let n_trial = max_norm(&r_trial);
                    if n_trial < norm {
                        candidate = Some((trial, r_trial, n_trial));
                        newton_steps += 1;
                        break;
                    }
                    lambda *= 0.5;
                }
            }
        }

        if candidate.is_none() {
            let (mut a, mut target) = p.picard_system(&u, &mut ext);
            a.factorize()
                .map_err(|row| fail(format!("zero pivot in Picard matrix at row {row}"), iterations, &history, &u))?;
            a.solve(&mut target);
            let mut omega = cfg.damping;
            let mut best: Option<(Vec<f64>, Vec<f64>, f64)> = None;
            for _ in 0..6 {
                let trial: Vec<f64> = u.iter().zip(&target).map(|(a, b)| a + omega * (b - a)).collect();
                let mut r_trial = vec![0.0; m];
                p.residual(&trial, &mut ext, &mut r_trial);
                let n_trial = max_norm(&r_trial);
                let better = best.as_ref().is_none_or(|b| n_trial < b.2);
                if better {
                    best = Some((trial, r_trial, n_trial));
                }
                if n_trial < norm {
                    break;
                }
                omega *= 0.5;
            }
            candidate = best;
        }

        let (next, r_next, n_next) = candidate.expect("at least one trial");
        if !n_next.is_finite() {
            return Err(fail("non-finite residual".into(), iterations, &history, &u));
        }
        if n_next >= norm {
            increases += 1;
            if increases >= MAX_INCREASES {
                return Err(fail(
                    format!("residual increased over {MAX_INCREASES} successive steps"),
                    iterations,
                    &history,
                    &next,
                ));
            }
        } else {
            increases = 0;
        }
        u = next;
        res = r_next;
        norm = n_next;
        history.push(norm);
    }

    Ok(SymmetricGrid {
        r,
        h,
        n: p.n,
        values: p.full_values(&u),
        unknowns: m,
        residual: norm,
        residual_history: history,
        iterations,
        newton_steps,
    })
}

/// Violations of `u_under <= u <= u_bar` on the domain cells above the diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrappingReport {
    /// `max (u - u_bar)^+`.
    pub above: f64,
    /// `max (u_under - u)^+`.
    pub below: f64,
    /// Smallest value of the solution on `{t > s}`.
    pub min_value: f64,
    /// Largest `|u|` on the diagonal.
    pub diagonal_max: f64,
    pub cells: usize,
}

impl TrappingReport {
    pub fn max_violation(&self) -> f64 {
        self.above.max(self.below)
    }
}

pub fn verify_trapping(sol: &SymmetricGrid, spec: &BarrierSpec) -> Result<TrappingReport> {
    let mut rep = TrappingReport { above: 0.0, below: 0.0, min_value: f64::INFINITY, diagonal_max: 0.0, cells: 0 };
    for j in 0..sol.n {
        for i in 0..=j {
            if !sol.in_domain(i, j) {
                continue;
            }
            let u = sol.value(i, j);
            if i == j {
                rep.diagonal_max = rep.diagonal_max.max(u.abs());
                continue;
            }
            let p = ReducedPoint { s: sol.center(i), t: sol.center(j) };
            let upper = spec.supersolution_log_value(p)?;
            if !LogValue::from_value(u).le(&upper) {
                rep.above = rep.above.max(u - upper.value());
            }
            rep.below = rep.below.max(spec.subsolution_value(p)? - u);
            rep.min_value = rep.min_value.min(u);
            rep.cells += 1;
        }
    }
    Ok(rep)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthFit {
    pub exponent: f64,
    pub log_constant: f64,
    pub max_residual: f64,
}

/// Least-squares slope of `log max|u_R|` against `log R`.
pub fn growth_exponent(radii: &[f64], maxima: &[f64]) -> Result<GrowthFit> {
    if radii.len() < 3 || radii.len() != maxima.len() {
        return Err(Error::Fit("growth fit needs at least three radii with one maximum each".into()));
    }
    let ratio = radii[1] / radii[0];
    let geometric = ratio > 1.0
        && radii.windows(2).all(|w| ((w[1] / w[0]) - ratio).abs() <= 1e-9 * ratio);
    if !geometric {
        return Err(Error::Fit("radii must form an increasing geometric progression".into()));
    }
    if maxima.iter().any(|m| !(*m > 0.0) || !m.is_finite()) {
        return Err(Error::Fit("maxima must be positive and finite".into()));
    }
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = maxima.iter().map(|m| m.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).abs()).fold(0.0, f64::max);
    Ok(GrowthFit { exponent: slope, log_constant: intercept, max_residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_data_gives_zero_solution() {
        let sol = dirichlet_solve(2.0, 2.0 / 32.0, |_, _| Ok(0.0), &SolverConfig::default()).unwrap();
        assert!(sol.values.iter().all(|&v| v == 0.0 || v.is_nan()));
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn rejects_coarse_grids_and_bad_config() {
        assert!(dirichlet_solve(2.0, 0.1, |_, _| Ok(0.0), &SolverConfig::default()).is_err());
        let cfg = SolverConfig { tol: 1e-16, ..SolverConfig::default() };
        assert!(matches!(dirichlet_solve(2.0, 2.0 / 32.0, |_, _| Ok(0.0), &cfg), Err(Error::Input(_))));
    }

    #[test]
    fn growth_fit_recovers_power() {
        let radii = [4.0, 8.0, 16.0];
        let maxima: Vec<f64> = radii.iter().map(|r: &f64| 0.3 * r.powi(3)).collect();
        let fit = growth_exponent(&radii, &maxima).unwrap();
        assert!((fit.exponent - 3.0).abs() < 1e-12);
        assert!(growth_exponent(&[1.0, 2.0, 5.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(growth_exponent(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }
}
