//! Adaptive Dormand-Prince 5(4) integrator for reference solutions.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-12,
            atol: 1e-12,
            max_steps: 1_000_000,
        }
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Difference between the fifth- and fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `x' = f(t, x)` from `(t0, x0)` to `t1 > t0`.
pub fn dopri5<F>(f: F, t0: f64, x0: &[f64], t1: f64, opts: &OdeOptions) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    if t1 == t0 {
        return Ok(x);
    }
    if !(t1 > t0) {
        return Err(Error::InvalidInput("integration must run forward in time".into()));
    }
    let mut t = t0;
    let mut h = ((t1 - t0) * 1e-3).max(1e-8);
    let mut k = vec![vec![0.0; n]; 7];
    let mut y = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    f(t, &x, &mut k[0]);
    for _ in 0..opts.max_steps {
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = x[i];
                for j in 0..s {
                    acc += h * A[s][j] * k[j][i];
                }
                y[i] = acc;
            }
            f(t + C[s] * h, &y, &mut k[s]);
        }
        // Stage 7 is evaluated at the fifth-order solution, which is `y`.
        x_new.copy_from_slice(&y);
        let mut err = 0.0f64;
        for i in 0..n {
            let e: f64 = (0..7).map(|s| E[s] * k[s][i]).sum::<f64>() * h;
            let sc = opts.atol + opts.rtol * x[i].abs().max(x_new[i].abs());
            err = err.max((e / sc).abs());
        }
        if !err.is_finite() {
            return Err(Error::NonFinite { index: 0 });
        }
        if err <= 1.0 {
            t = if last { t1 } else { t + h };
            x.copy_from_slice(&x_new);
            if last {
                return Ok(x);
            }
            k.swap(0, 6);
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    Err(Error::InvalidInput("step limit reached before the end time".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let x = dopri5(|_, x, o| o[0] = -x[0], 0.0, &[1.0], 2.0, &OdeOptions::default()).unwrap();
        assert!((x[0] - (-2.0f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn harmonic_oscillator_period() {
        let f = |_: f64, x: &[f64], o: &mut [f64]| {
            o[0] = x[1];
            o[1] = -x[0];
        };
        let x = dopri5(f, 0.0, &[1.0, 0.0], 2.0 * std::f64::consts::PI, &OdeOptions::default())
            .unwrap();
        assert!((x[0] - 1.0).abs() < 1e-10 && x[1].abs() < 1e-10);
    }

    #[test]
    fn time_dependent_rhs_is_exact_on_polynomials() {
        let x = dopri5(|t, _, o| o[0] = 3.0 * t * t, 0.0, &[0.0], 1.5, &OdeOptions::default())
            .unwrap();
        assert!((x[0] - 3.375).abs() < 1e-13);
        assert!(dopri5(|_, _, o| o[0] = 0.0, 1.0, &[0.0], 0.0, &OdeOptions::default()).is_err());
    }
}
