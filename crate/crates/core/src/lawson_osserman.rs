//! The graphical minimal cone over the Hopf fibration: `u(z) = k |z| H(z/|z|)`
//! from `R^4` to `R^3`.

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::roots::bisect;

const NORM_TOL: f64 = 1e-8;
/// Finite-difference step relative to `|z|`.
pub const FD_STEP: f64 = 1e-4;
pub const K_BRACKET: (f64, f64) = (0.5, 2.0);

/// Unit vector of `C^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct S3Point {
    pub z1: Complex64,
    pub z2: Complex64,
}

impl S3Point {
    /// Accepts points within `1e-8` of the sphere and projects them onto it.
    pub fn new(z1: Complex64, z2: Complex64) -> Result<Self> {
        let n = (z1.norm_sqr() + z2.norm_sqr()).sqrt();
        if !((n - 1.0).abs() <= NORM_TOL) {
            return Err(Error::Input(format!("point has norm {n}, expected 1")));
        }
        Ok(Self { z1: z1 / n, z2: z2 / n })
    }

    pub fn from_real(x: [f64; 4]) -> Result<Self> {
        Self::new(Complex64::new(x[0], x[1]), Complex64::new(x[2], x[3]))
    }

    pub fn to_real(self) -> [f64; 4] {
        [self.z1.re, self.z1.im, self.z2.re, self.z2.im]
    }

    /// `a + b i + c j + d k` for `z1 = a + b i`, `z2 = c + d i`.
    pub fn quaternion(self) -> Quaternion {
        Quaternion(self.to_real())
    }

    /// Product in `SU(2)` through `z <-> [[z1, z2], [-conj z2, conj z1]]`.
    pub fn mul(self, other: Self) -> Self {
        let (a1, a2) = (self.z1, self.z2);
        let (b1, b2) = (other.z1, other.z2);
        Self { z1: a1 * b1 - a2 * b2.conj(), z2: a1 * b2 + a2 * b1.conj() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quaternion(pub [f64; 4]);

impl Quaternion {
    pub fn mul(self, o: Self) -> Self {
        let [a1, b1, c1, d1] = self.0;
        let [a2, b2, c2, d2] = o.0;
        Self([
            a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
            a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
            a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
            a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
        ])
    }

    pub fn conj(self) -> Self {
        let [a, b, c, d] = self.0;
        Self([a, -b, -c, -d])
    }

    /// Matrix of `p -> q p q^{-1}` on pure quaternions, for unit `q`.
    pub fn rotation(self) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for col in 0..3 {
            let mut e = [0.0; 4];
            e[col + 1] = 1.0;
            let r = self.mul(Quaternion(e)).mul(self.conj()).0;
            for row in 0..3 {
                out[row][col] = r[row + 1];
            }
        }
        out
    }
}

/// `(|z1|^2 - |z2|^2, -2i z1 z2)` as a point of `R x C = R^3`.
pub fn hopf_map(p: &S3Point) -> [f64; 3] {
    let w = Complex64::new(0.0, -2.0) * p.z1 * p.z2;
    [p.z1.norm_sqr() - p.z2.norm_sqr(), w.re, w.im]
}

/// Quadratic forms `P_a` with `u^a = k P_a(x) / |x|`.
fn forms() -> [Matrix4<f64>; 3] {
    // x = (a, b, c, d): P1 = a^2 + b^2 - c^2 - d^2, P2 = 2(ad + bc), P3 = 2(bd - ac).
    let p1 = Matrix4::from_diagonal(&Vector4::new(1.0, 1.0, -1.0, -1.0));
    let mut p2 = Matrix4::zeros();
    p2[(0, 3)] = 1.0;
    p2[(3, 0)] = 1.0;
    p2[(1, 2)] = 1.0;
    p2[(2, 1)] = 1.0;
    let mut p3 = Matrix4::zeros();
    p3[(1, 3)] = 1.0;
    p3[(3, 1)] = 1.0;
    p3[(0, 2)] = -1.0;
    p3[(2, 0)] = -1.0;
    [p1, p2, p3]
}

/// The cone map with slope `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoConeMap {
    pub k: f64,
}

/// Values, gradients and Hessians of the three components at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: [f64; 3],
    pub gradient: [Vector4<f64>; 3],
    pub hessian: [Matrix4<f64>; 3],
}

impl LoConeMap {
    pub fn new(k: f64) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::Input(format!("cone slope must be positive, got {k}")));
        }
        Ok(Self { k })
    }

    fn check(x: &[f64; 4]) -> Result<f64> {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::Domain(format!("map is singular at {x:?}")));
        }
        Ok(r)
    }

    pub fn eval(&self, x: [f64; 4]) -> Result<[f64; 3]> {
        let r = Self::check(&x)?;
        let v = Vector4::from(x);
        let f = forms();
        Ok([0, 1, 2].map(|a| self.k * v.dot(&(f[a] * v)) / r))
    }

    /// Closed-form derivatives of `k P(x) / r`.
    pub fn jet(&self, x: [f64; 4]) -> Result<Jet> {
        let r = Self::check(&x)?;
        let v = Vector4::from(x);
        let f = forms();
        let (r3, r5) = (r.powi(3), r.powi(5));
        let k = self.k;
        let mut value = [0.0; 3];
        let mut gradient = [Vector4::zeros(); 3];
        let mut hessian = [Matrix4::zeros(); 3];
        for a in 0..3 {
            let av = f[a] * v;
            let p = v.dot(&av);
            value[a] = k * p / r;
            gradient[a] = (av * 2.0 / r - v * (p / r3)) * k;
            let cross = av * v.transpose() + v * av.transpose();
            hessian[a] = (f[a] * (2.0 / r) - cross * (2.0 / r3) - Matrix4::identity() * (p / r3)
                + v * v.transpose() * (3.0 * p / r5))
                * k;
        }
        Ok(Jet { value, gradient, hessian })
    }

    /// `g = I + Du^T Du`.
    pub fn metric(&self, x: [f64; 4]) -> Result<Matrix4<f64>> {
        Ok(metric_from(&self.jet(x)?.gradient))
    }

    /// Jet by second-order centered differences with step `h`.
    pub fn jet_fd(&self, x: [f64; 4], h: f64) -> Result<Jet> {
        let r = Self::check(&x)?;
        if !(h > 0.0) || h >= 0.5 * r {
            return Err(Error::Domain(format!("step {h} unusable at distance {r} from the vertex")));
        }
        let at = |d: [f64; 4]| -> Result<[f64; 3]> {
            self.eval([x[0] + d[0], x[1] + d[1], x[2] + d[2], x[3] + d[3]])
        };
        let e = |i: usize, s: f64| {
            let mut d = [0.0; 4];
            d[i] = s;
            d
        };
        let center = at([0.0; 4])?;
        let mut gradient = [Vector4::zeros(); 3];
        let mut hessian = [Matrix4::zeros(); 3];
        for i in 0..4 {
            let (p, m) = (at(e(i, h))?, at(e(i, -h))?);
            for a in 0..3 {
                gradient[a][i] = (p[a] - m[a]) / (2.0 * h);
                hessian[a][(i, i)] = (p[a] - 2.0 * center[a] + m[a]) / (h * h);
            }
            for j in 0..i {
                let mut pp = e(i, h);
                pp[j] = h;
                let mut mm = e(i, -h);
                mm[j] = -h;
                let mut pm = e(i, h);
                pm[j] = -h;
                let mut mp = e(i, -h);
                mp[j] = h;
                let (fpp, fmm, fpm, fmp) = (at(pp)?, at(mm)?, at(pm)?, at(mp)?);
                for a in 0..3 {
                    let v = (fpp[a] - fpm[a] - fmp[a] + fmm[a]) / (4.0 * h * h);
                    hessian[a][(i, j)] = v;
                    hessian[a][(j, i)] = v;
                }
            }
        }
        Ok(Jet { value: center, gradient, hessian })
    }
}

fn metric_from(gradient: &[Vector4<f64>; 3]) -> Matrix4<f64> {
    let mut g = Matrix4::identity();
    for d in gradient {
        g += d * d.transpose();
    }
    g
}

fn system_residual(jet: &Jet) -> Result<[f64; 3]> {
    let g = metric_from(&jet.gradient);
    let gi = g.try_inverse().ok_or_else(|| Error::Domain("metric is singular".into()))?;
    Ok([0, 1, 2].map(|a| gi.component_mul(&jet.hessian[a]).sum()))
}

/// `g^{ij} u^a_{ij}` from the closed-form derivatives.
pub fn mss_residual_at(x: [f64; 4], k: f64) -> Result<[f64; 3]> {
    system_residual(&LoConeMap::new(k)?.jet(x)?)
}

/// Same, from centered differences with step `FD_STEP |x|`.
pub fn mss_residual_fd(x: [f64; 4], k: f64) -> Result<[f64; 3]> {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    system_residual(&LoConeMap::new(k)?.jet_fd(x, FD_STEP * r)?)
}

/// First component at `(1, 0)`: `k (1 - 6 / (1 + 4 k^2))`.
pub fn axis_residual(k: f64) -> f64 {
    k * (1.0 - 6.0 / (1.0 + 4.0 * k * k))
}

/// Root of [`axis_residual`] in `K_BRACKET`.
pub fn solve_k() -> f64 {
    bisect(axis_residual, K_BRACKET.0, K_BRACKET.1, 1e-15).expect("sign change on the bracket")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquivarianceCheck {
    pub residual_at_z: [f64; 3],
    pub residual_at_axis: [f64; 3],
    /// `| |res(z)| - |res(|z|, 0)| | / max(1, |res(|z|, 0)|)`.
    pub difference: f64,
}

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Compares the finite-difference residual at `x` with the closed-form
/// residual on the axis point at the same distance.
pub fn equivariance_check(x: [f64; 4], k: f64) -> Result<EquivarianceCheck> {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let residual_at_z = mss_residual_fd(x, k)?;
    let residual_at_axis = mss_residual_at([r, 0.0, 0.0, 0.0], k)?;
    let ra = norm3(&residual_at_axis);
    let difference = (norm3(&residual_at_z) - ra).abs() / ra.max(1.0);
    Ok(EquivarianceCheck { residual_at_z, residual_at_axis, difference })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoReport {
    pub k_star: f64,
    pub max_residual: f64,
    pub n_samples: usize,
}

/// Uniform random point with `|x|` in `[r_lo, r_hi]`.
pub fn random_point<R: Rng>(rng: &mut R, r_lo: f64, r_hi: f64) -> [f64; 4] {
    loop {
        let v: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-3 {
            let r = rng.random_range(r_lo..=r_hi);
            return v.map(|a| a * r / n);
        }
    }
}

/// Largest finite-difference residual of the cone with the solved slope at
/// `n_samples` random points with `|z|` in `[1/2, 2]`.
pub fn lawson_osserman_report(n_samples: usize, seed: u64) -> Result<LoReport> {
    let k_star = solve_k();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_residual = 0.0_f64;
    for _ in 0..n_samples {
        let x = random_point(&mut rng, 0.5, 2.0);
        let r = mss_residual_fd(x, k_star)?;
        max_residual = max_residual.max(r.iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    Ok(LoReport { k_star, max_residual, n_samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn hopf_poles() {
        assert_eq!(hopf_map(&S3Point::new(c(1.0, 0.0), c(0.0, 0.0)).unwrap()), [1.0, 0.0, 0.0]);
        assert_eq!(hopf_map(&S3Point::new(c(0.0, 0.0), c(1.0, 0.0)).unwrap()), [-1.0, 0.0, 0.0]);
        assert!(S3Point::new(c(1.1, 0.0), c(0.0, 0.0)).is_err());
    }

    #[test]
    fn axis_metric_and_residual() {
        let k = 1.0;
        let g = LoConeMap::new(k).unwrap().metric([1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(g, Matrix4::from_diagonal(&Vector4::new(2.0, 1.0, 5.0, 5.0)));
        let r = mss_residual_at([1.0, 0.0, 0.0, 0.0], k).unwrap();
        assert!((r[0] + 0.2).abs() < 1e-15);
        assert_eq!((r[1], r[2]), (0.0, 0.0));
        let jet = LoConeMap::new(2.0).unwrap().jet([1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(jet.hessian[0], Matrix4::from_diagonal(&Vector4::new(0.0, 2.0, -6.0, -6.0)));
    }

    #[test]
    fn slope_root() {
        let k = solve_k();
        assert!((k - 5.0_f64.sqrt() / 2.0).abs() < 1e-12);
        assert!((1.0 + 4.0 * k * k - 6.0).abs() < 1e-12);
    }

    #[test]
    fn vertex_is_rejected() {
        assert!(matches!(mss_residual_at([0.0; 4], 1.0), Err(Error::Domain(_))));
        assert!(LoConeMap::new(0.0).is_err());
    }
}
