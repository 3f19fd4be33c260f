//! Dormand-Prince 5(4) with local extrapolation.

// Butcher tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Difference between the 5th and 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub h_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Stop {
    Finished,
    /// The step size collapsed below `h_min`.
    StepUnderflow,
    /// The observer rejected an accepted state.
    Rejected,
    NonFinite,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Outcome<const N: usize> {
    pub stop: Stop,
    pub t: f64,
    pub y: [f64; N],
    pub h: f64,
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end`, calling `observe` after
/// every accepted step. The observer returns `false` to abort.
pub(crate) fn integrate<const N: usize, F, O>(
    f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    tol: Tolerances,
    mut observe: O,
) -> Outcome<N>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
    O: FnMut(f64, &[f64; N], &[f64; N]) -> bool,
{
    let mut t = t0;
    let mut y = y0;
    let mut h = tol.h_init.min(tol.h_max).min(t_end - t0);
    let mut k1 = f(t, &y);

    while t < t_end {
        if t + h > t_end {
            h = t_end - t;
        }
        let k2 = f(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]));
        let k3 = f(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(t + C4 * h, &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(
            t + C5 * h,
            &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            t + h,
            &axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let y_new = axpy(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = f(t + h, &y_new);

        let mut err = 0.0f64;
        for i in 0..N {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
            err = err.max((e / scale).abs());
        }
        if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            if h <= tol.h_min {
                return Outcome { stop: Stop::NonFinite, t, y, h };
            }
            h *= 0.25;
            continue;
        }

        if err <= 1.0 {
            t += h;
            y = y_new;
            k1 = k7;
            if !observe(t, &y, &k1) {
                return Outcome { stop: Stop::Rejected, t, y, h };
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (h * factor).min(tol.h_max);
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            if h < tol.h_min {
                return Outcome { stop: Stop::StepUnderflow, t, y, h };
            }
        }
    }
    Outcome { stop: Stop::Finished, t, y, h }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_is_reproduced() {
        let tol = Tolerances { rtol: 1e-12, atol: 1e-14, h_init: 1e-3, h_max: 0.1, h_min: 1e-14 };
        let out = integrate(|_, y: &[f64; 1]| [-y[0]], 0.0, [1.0], 5.0, tol, |_, _, _| true);
        assert_eq!(out.stop, Stop::Finished);
        assert!((out.y[0] - (-5.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn harmonic_oscillator_conserves_energy() {
        let tol = Tolerances { rtol: 1e-11, atol: 1e-13, h_init: 1e-2, h_max: 0.05, h_min: 1e-14 };
        let out = integrate(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, [1.0, 0.0], 20.0, tol, |_, _, _| true);
        assert!((out.y[0] - 20f64.cos()).abs() < 1e-9);
        assert!((out.y[0].powi(2) + out.y[1].powi(2) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn observer_can_abort() {
        let tol = Tolerances { rtol: 1e-8, atol: 1e-10, h_init: 1e-2, h_max: 0.1, h_min: 1e-14 };
        let out = integrate(|_, y: &[f64; 1]| [y[0]], 0.0, [1.0], 10.0, tol, |_, y, _| y[0] < 2.0);
        assert_eq!(out.stop, Stop::Rejected);
        assert!(out.y[0] >= 2.0 && out.t < 1.0);
    }
}
