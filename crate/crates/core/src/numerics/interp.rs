/// Piecewise quintic Hermite interpolant through values and first two
/// derivatives at strictly increasing nodes.
#[derive(Debug, Clone)]
pub(crate) struct QuinticHermite {
    xs: Vec<f64>,
    f: Vec<f64>,
    fp: Vec<f64>,
    fpp: Vec<f64>,
}

impl QuinticHermite {
    pub(crate) fn new(xs: Vec<f64>, f: Vec<f64>, fp: Vec<f64>, fpp: Vec<f64>) -> Self {
        debug_assert!(xs.len() >= 2);
        debug_assert!(xs.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(f.len() == xs.len() && fp.len() == xs.len() && fpp.len() == xs.len());
        Self { xs, f, fp, fpp }
    }

    pub(crate) fn lo(&self) -> f64 {
        self.xs[0]
    }

    pub(crate) fn hi(&self) -> f64 {
        *self.xs.last().unwrap()
    }

    /// Index `k` with `xs[k] <= x <= xs[k + 1]`.
    pub(crate) fn interval(&self, x: f64) -> Option<usize> {
        if !(x >= self.lo() && x <= self.hi()) {
            return None;
        }
        let k = self.xs.partition_point(|&v| v <= x);
        Some(k.saturating_sub(1).min(self.xs.len() - 2))
    }

    /// Value and first two derivatives at `x`, or `None` outside the nodes.
    pub(crate) fn eval(&self, x: f64) -> Option<[f64; 3]> {
        let k = self.interval(x)?;
        let (x0, x1) = (self.xs[k], self.xs[k + 1]);
        let h = x1 - x0;
        let u = (x - x0) / h;
        let (u2, u3) = (u * u, u * u * u);
        let (u4, u5) = (u3 * u, u3 * u2);

        // Basis values, first and second u-derivatives.
        let b = [
            [1.0 - 10.0 * u3 + 15.0 * u4 - 6.0 * u5, -30.0 * u2 + 60.0 * u3 - 30.0 * u4, -60.0 * u + 180.0 * u2 - 120.0 * u3],
            [u - 6.0 * u3 + 8.0 * u4 - 3.0 * u5, 1.0 - 18.0 * u2 + 32.0 * u3 - 15.0 * u4, -36.0 * u + 96.0 * u2 - 60.0 * u3],
            [
                0.5 * (u2 - 3.0 * u3 + 3.0 * u4 - u5),
                0.5 * (2.0 * u - 9.0 * u2 + 12.0 * u3 - 5.0 * u4),
                0.5 * (2.0 - 18.0 * u + 36.0 * u2 - 20.0 * u3),
            ],
            [10.0 * u3 - 15.0 * u4 + 6.0 * u5, 30.0 * u2 - 60.0 * u3 + 30.0 * u4, 60.0 * u - 180.0 * u2 + 120.0 * u3],
            [-4.0 * u3 + 7.0 * u4 - 3.0 * u5, -12.0 * u2 + 28.0 * u3 - 15.0 * u4, -24.0 * u + 84.0 * u2 - 60.0 * u3],
            [
                0.5 * (u3 - 2.0 * u4 + u5),
                0.5 * (3.0 * u2 - 8.0 * u3 + 5.0 * u4),
                0.5 * (6.0 * u - 24.0 * u2 + 20.0 * u3),
            ],
        ];
        let c = [
            self.f[k],
            self.fp[k] * h,
            self.fpp[k] * h * h,
            self.f[k + 1],
            self.fp[k + 1] * h,
            self.fpp[k + 1] * h * h,
        ];
        let mut out = [0.0; 3];
        for (ci, bi) in c.iter().zip(&b) {
            out[0] += ci * bi[0];
            out[1] += ci * bi[1];
            out[2] += ci * bi[2];
        }
        out[1] /= h;
        out[2] /= h * h;
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_quintic_polynomials_exactly() {
        let p = |x: f64| [
            1.0 - 2.0 * x + 0.5 * x.powi(3) + 0.1 * x.powi(5),
            -2.0 + 1.5 * x * x + 0.5 * x.powi(4),
            3.0 * x + 2.0 * x.powi(3),
        ];
        let xs: Vec<f64> = vec![0.0, 0.3, 1.1, 2.0];
        let vals: Vec<[f64; 3]> = xs.iter().map(|&x| p(x)).collect();
        let q = QuinticHermite::new(
            xs.clone(),
            vals.iter().map(|v| v[0]).collect(),
            vals.iter().map(|v| v[1]).collect(),
            vals.iter().map(|v| v[2]).collect(),
        );
        for x in [0.0, 0.1, 0.7, 1.5, 2.0] {
            let got = q.eval(x).unwrap();
            let want = p(x);
            for i in 0..3 {
                assert!((got[i] - want[i]).abs() < 1e-12, "x = {x}, i = {i}");
            }
        }
        assert!(q.eval(2.1).is_none());
    }
}
