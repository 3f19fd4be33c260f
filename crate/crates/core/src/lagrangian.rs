//! Rotation of gradient graphs in `C^n`, the special Lagrangian operator and
//! the convexity of its level sets.

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

/// Values below `-WITNESS_TOL` count as violations of level-set convexity.
pub const WITNESS_TOL: f64 = 1e-12;

const SYMMETRY_TOL: f64 = 1e-12;
const DET_TOL: f64 = 1e-6;

/// Hessian eigenvalues in decreasing order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumVector {
    lambdas: Vec<f64>,
}

impl SpectrumVector {
    pub fn new(mut lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() || lambdas.iter().any(|l| !l.is_finite()) {
            return Err(Error::Input("spectrum must be non-empty and finite".into()));
        }
        lambdas.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { lambdas })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// Spectrum after rotating every eigenvalue by `theta`.
    pub fn rotate(&self, theta: RotationAngle) -> Result<Self> {
        let l = self.lambdas.iter().map(|&l| rotate_eigenvalue(l, theta)).collect::<Result<Vec<_>>>()?;
        Self::new(l)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RotationAngle {
    theta: f64,
}

impl RotationAngle {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < std::f64::consts::PI) {
            return Err(Error::Input(format!("rotation angle must lie in (0, pi), got {theta}")));
        }
        Ok(Self { theta })
    }

    pub fn value(self) -> f64 {
        self.theta
    }
}

/// `(-sin t + cos t l) / (cos t + sin t l)`, so that `atan` drops by `t`.
pub fn rotate_eigenvalue(lambda: f64, theta: RotationAngle) -> Result<f64> {
    let (s, c) = theta.theta.sin_cos();
    let den = c + s * lambda;
    if !(den > 0.0) {
        return Err(Error::GraphCondition(format!(
            "cos + sin * lambda = {den:e} <= 0 for lambda = {lambda}, theta = {}",
            theta.theta
        )));
    }
    Ok((-s + c * lambda) / den)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotatedHessian {
    pub matrix: DMatrix<f64>,
    /// Rotated eigenvalues, decreasing.
    pub eigenvalues: Vec<f64>,
    /// Condition number of `cos t I + sin t M`.
    pub condition: f64,
}

/// `(-sin t I + cos t M)(cos t I + sin t M)^{-1}` through the eigenbasis of `M`.
pub fn rotate_hessian(m: &DMatrix<f64>, theta: RotationAngle) -> Result<RotatedHessian> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::Input(format!("Hessian must be square, got {}x{}", m.nrows(), m.ncols())));
    }
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > SYMMETRY_TOL * scale {
        return Err(Error::Input("Hessian is not symmetric".into()));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let (s, c) = theta.theta.sin_cos();
    let dens: Vec<f64> = eig.eigenvalues.iter().map(|&l| c + s * l).collect();
    let dmin = dens.iter().cloned().fold(f64::INFINITY, f64::min);
    let dmax = dens.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(dmin > 0.0) {
        return Err(Error::GraphCondition(format!(
            "cos + sin * M is not positive definite (smallest eigenvalue {dmin:e})"
        )));
    }
    let rotated = eig.eigenvalues.map(|l| (-s + c * l) / (c + s * l));
    let q = &eig.eigenvectors;
    let matrix = q * DMatrix::from_diagonal(&rotated) * q.transpose();
    let matrix = (&matrix + matrix.transpose()) * 0.5;
    let mut eigenvalues: Vec<f64> = rotated.iter().cloned().collect();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    Ok(RotatedHessian { matrix, eigenvalues, condition: dmax / dmin })
}

/// `sum atan(lambda_i) - Theta`.
pub fn slag_value(spec: &SpectrumVector, big_theta: f64) -> f64 {
    spec.lambdas.iter().map(|l| l.atan()).sum::<f64>() - big_theta
}

/// `sum x_i z_i^2 (1 + x_i^2)^{-2}`.
pub fn levelset_quadratic(x: &[f64], z: &[f64]) -> f64 {
    x.iter().zip(z).map(|(&xi, &zi)| xi * zi * zi / (1.0 + xi * xi).powi(2)).sum()
}

/// `sum z_i / (1 + x_i^2)`, zero for tangent vectors of the level set.
pub fn tangency_defect(x: &[f64], z: &[f64]) -> f64 {
    x.iter().zip(z).map(|(&xi, &zi)| zi / (1.0 + xi * xi)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessRecord {
    pub theta: f64,
    pub n: usize,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub value: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ConvexityOutcome {
    NoViolation { min_value: f64, accepted: usize, rejected: usize },
    /// Most negative sample; `first_index` is the first accepted sample below tolerance.
    Witness { record: WitnessRecord, first_index: usize, accepted: usize, rejected: usize },
}

impl ConvexityOutcome {
    pub fn min_value(&self) -> f64 {
        match self {
            Self::NoViolation { min_value, .. } => *min_value,
            Self::Witness { record, .. } => record.value,
        }
    }
}

/// Samples `{sum atan x_i = Theta}` and tangent directions, looking for a
/// negative value of [`levelset_quadratic`].
///
/// `x_2..x_n` are Cauchy distributed and `x_1` is solved for; tangent
/// directions are Gaussian, projected onto the tangent space.
pub fn levelset_convexity_witness(n: usize, big_theta: f64, n_samples: usize, seed: u64) -> Result<ConvexityOutcome> {
    if n < 2 || n_samples == 0 {
        return Err(Error::Input(format!("need n >= 2 and at least one sample, got n = {n}, {n_samples} samples")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut accepted = 0;
    let mut rejected = 0;
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    let mut first_index = None;
    for _ in 0..n_samples {
        let mut angle_sum = 0.0;
        for xi in x.iter_mut().skip(1) {
            let a: f64 = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
            *xi = a.tan();
            angle_sum += xi.atan();
        }
        let rest = big_theta - angle_sum;
        if !(rest.abs() < FRAC_PI_2) {
            rejected += 1;
            continue;
        }
        x[0] = rest.tan();
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        let w: Vec<f64> = x.iter().map(|xi| 1.0 / (1.0 + xi * xi)).collect();
        let ww: f64 = w.iter().map(|v| v * v).sum();
        let wz = tangency_defect(&x, &z);
        for (zi, wi) in z.iter_mut().zip(&w) {
            *zi -= wz / ww * wi;
        }
        let value = levelset_quadratic(&x, &z);
        if value < -WITNESS_TOL && first_index.is_none() {
            first_index = Some(accepted);
        }
        accepted += 1;
        if best.as_ref().is_none_or(|b| value < b.0) {
            best = Some((value, x.clone(), z.clone()));
        }
    }
    let Some((value, bx, bz)) = best else {
        return Err(Error::Sampling(format!(
            "all {n_samples} samples fell outside the level set Theta = {big_theta}"
        )));
    };
    Ok(match first_index {
        None => ConvexityOutcome::NoViolation { min_value: value, accepted, rejected },
        Some(first_index) => ConvexityOutcome::Witness {
            record: WitnessRecord { theta: big_theta, n, x: bx, z: bz, value, seed },
            first_index,
            accepted,
            rejected,
        },
    })
}

/// The explicit violation at `Theta = 0`, `n = 3`.
pub fn known_witness() -> WitnessRecord {
    let x = vec![1.0, -1.0, 0.0];
    let z = vec![0.0, 2.0, -1.0];
    let value = levelset_quadratic(&x, &z);
    WitnessRecord { theta: 0.0, n: 3, x, z, value, seed: 0 }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JorgensReport {
    pub samples: usize,
    pub max_abs_trace: f64,
    pub max_abs_eigenvalue: f64,
    pub passed: bool,
}

/// Rotates each unimodular positive Hessian by `pi/4`; the images must be
/// trace free with spectrum inside `(-1, 1)`.
pub fn jorgens_rotation_check(samples: &[Matrix2<f64>]) -> Result<JorgensReport> {
    let theta = RotationAngle::new(std::f64::consts::FRAC_PI_4)?;
    let mut max_abs_trace = 0.0_f64;
    let mut max_abs_eigenvalue = 0.0_f64;
    for (k, m) in samples.iter().enumerate() {
        let det = m.determinant();
        if (det - 1.0).abs() > DET_TOL {
            return Err(Error::Input(format!("sample {k}: det = {det}, expected 1")));
        }
        if !(m[(0, 0)] > 0.0) {
            return Err(Error::Input(format!("sample {k} is not positive definite")));
        }
        let d = DMatrix::from_fn(2, 2, |i, j| m[(i, j)]);
        let rot = rotate_hessian(&d, theta)?;
        max_abs_trace = max_abs_trace.max(rot.matrix.trace().abs());
        for l in rot.eigenvalues {
            max_abs_eigenvalue = max_abs_eigenvalue.max(l.abs());
        }
    }
    Ok(JorgensReport {
        samples: samples.len(),
        max_abs_trace,
        max_abs_eigenvalue,
        passed: max_abs_trace <= 1e-8 && max_abs_eigenvalue < 1.0,
    })
}
