use crate::error::{check_len, Error, Result};

use super::{hs_coeffs_into, taylor_eval, tz_coeffs_into, Family, SchemeId, MAX_COEFFS};

/// How controls are reconstructed between samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlInterp {
    /// Linear between knot controls (trapezoidal family).
    PiecewiseLinear,
    /// Quadratic through knot, midpoint and next knot controls (Hermite-Simpson family).
    PiecewiseQuadratic,
}

/// Taylor coefficients of one coordinate on one interval.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalCoeffs {
    pub a: Vec<f64>,
    pub h: f64,
    pub t_start: f64,
}

impl IntervalCoeffs {
    #[inline]
    pub fn eval(&self, tau: f64, r: usize) -> f64 {
        taylor_eval(&self.a, tau, r)
    }
}

/// Samples needed to rebuild a continuous trajectory after a solve.
///
/// States are flat level-major stacks of length `M * n_q`; dynamics samples
/// have length `n_q`. Midpoint vectors are empty for the trapezoidal family.
#[derive(Debug, Clone, Default)]
pub struct InterpolantSamples {
    pub knots: Vec<f64>,
    pub knot_states: Vec<Vec<f64>>,
    pub knot_g: Vec<Vec<f64>>,
    pub mid_g: Vec<Vec<f64>>,
    pub knot_controls: Vec<Vec<f64>>,
    pub mid_controls: Vec<Vec<f64>>,
}

/// Piecewise-polynomial state trajectory plus control reconstruction.
#[derive(Debug, Clone)]
pub struct PolyTrajectory {
    scheme: SchemeId,
    n_q: usize,
    n_u: usize,
    knots: Vec<f64>,
    /// `coeffs[i][k]`: coordinate `i`, interval `k`.
    coeffs: Vec<Vec<IntervalCoeffs>>,
    knot_controls: Vec<Vec<f64>>,
    mid_controls: Vec<Vec<f64>>,
    control_interp: ControlInterp,
}

/// Builds the per-interval polynomials from collocation samples.
pub fn build_interpolant(scheme: SchemeId, samples: &InterpolantSamples) -> Result<PolyTrajectory> {
    scheme.validate()?;
    let m = scheme.order;
    let n_knots = samples.knots.len();
    if n_knots < 2 {
        return Err(Error::InvalidInput("a trajectory needs at least two knots".into()));
    }
    let n = n_knots - 1;
    if samples.knots.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("knot times must be strictly increasing".into()));
    }
    check_len("knot states", n_knots, samples.knot_states.len())?;
    check_len("knot dynamics samples", n_knots, samples.knot_g.len())?;
    check_len("knot controls", n_knots, samples.knot_controls.len())?;
    let n_q = samples.knot_g[0].len();
    let n_u = samples.knot_controls[0].len();
    for (x, g) in samples.knot_states.iter().zip(&samples.knot_g) {
        check_len("knot state", m * n_q, x.len())?;
        check_len("knot dynamics sample", n_q, g.len())?;
    }
    for u in &samples.knot_controls {
        check_len("knot control", n_u, u.len())?;
    }
    let hs = scheme.family == Family::HermiteSimpson;
    if hs {
        check_len("midpoint dynamics samples", n, samples.mid_g.len())?;
        check_len("midpoint controls", n, samples.mid_controls.len())?;
        for (g, u) in samples.mid_g.iter().zip(&samples.mid_controls) {
            check_len("midpoint dynamics sample", n_q, g.len())?;
            check_len("midpoint control", n_u, u.len())?;
        }
    } else if !samples.mid_g.is_empty() || !samples.mid_controls.is_empty() {
        return Err(Error::InvalidInput(
            "trapezoidal trajectories take no midpoint samples".into(),
        ));
    }

    let n_coef = scheme.degree() + 1;
    let mut coeffs = vec![Vec::with_capacity(n); n_q];
    let mut y_k = vec![0.0; m];
    let mut a = [0.0; MAX_COEFFS];
    for k in 0..n {
        let h = samples.knots[k + 1] - samples.knots[k];
        for (i, per_coord) in coeffs.iter_mut().enumerate() {
            for (j, y) in y_k.iter_mut().enumerate() {
                *y = samples.knot_states[k][j * n_q + i];
            }
            let g_k = samples.knot_g[k][i];
            let g_k1 = samples.knot_g[k + 1][i];
            if hs {
                hs_coeffs_into(&y_k, g_k, samples.mid_g[k][i], g_k1, h, &mut a);
            } else {
                tz_coeffs_into(&y_k, g_k, g_k1, h, &mut a);
            }
            per_coord.push(IntervalCoeffs {
                a: a[..n_coef].to_vec(),
                h,
                t_start: samples.knots[k],
            });
        }
    }

    Ok(PolyTrajectory {
        scheme,
        n_q,
        n_u,
        knots: samples.knots.clone(),
        coeffs,
        knot_controls: samples.knot_controls.clone(),
        mid_controls: if hs { samples.mid_controls.clone() } else { Vec::new() },
        control_interp: if hs {
            ControlInterp::PiecewiseQuadratic
        } else {
            ControlInterp::PiecewiseLinear
        },
    })
}

impl PolyTrajectory {
    pub fn scheme(&self) -> SchemeId {
        self.scheme
    }

    /// Number of polynomial coordinates (the lifted state size for first-order schemes).
    pub fn n_q(&self) -> usize {
        self.n_q
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn order(&self) -> usize {
        self.scheme.order
    }

    pub fn degree(&self) -> usize {
        self.scheme.degree()
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn n_intervals(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn control_interp(&self) -> ControlInterp {
        self.control_interp
    }

    pub fn coeffs(&self, coord: usize, interval: usize) -> &IntervalCoeffs {
        &self.coeffs[coord][interval]
    }

    pub fn start(&self) -> f64 {
        self.knots[0]
    }

    pub fn end(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    /// Interval owning `t`; knots belong to the interval they start, the
    /// final knot to the last interval.
    pub fn locate(&self, t: f64) -> Result<usize> {
        if !(t >= self.start() && t <= self.end()) {
            return Err(Error::OutOfRange {
                t,
                start: self.start(),
                end: self.end(),
            });
        }
        let k = self.knots.partition_point(|&tk| tk <= t);
        Ok(k.saturating_sub(1).min(self.n_intervals() - 1))
    }

    /// `r`-th derivative of every coordinate at `t`, for `r <= M`.
    pub fn eval_interpolant(&self, t: f64, r: usize) -> Result<Vec<f64>> {
        if r > self.order() {
            return Err(Error::InvalidInput(format!(
                "derivative order {r} exceeds the dynamics order {}",
                self.order()
            )));
        }
        self.eval_derivative(t, r)
    }

    /// Like [`eval_interpolant`](Self::eval_interpolant) but accepts any `r`;
    /// derivatives above the polynomial degree are zero.
    pub fn eval_derivative(&self, t: f64, r: usize) -> Result<Vec<f64>> {
        let k = self.locate(t)?;
        let tau = t - self.knots[k];
        Ok(self.eval_on_interval(k, tau, r))
    }

    /// Evaluates interval `k`'s polynomials at local time `tau` (no range check).
    pub fn eval_on_interval(&self, k: usize, tau: f64, r: usize) -> Vec<f64> {
        self.coeffs.iter().map(|c| c[k].eval(tau, r)).collect()
    }

    /// Control at `t`.
    pub fn eval_control(&self, t: f64) -> Result<Vec<f64>> {
        let k = self.locate(t)?;
        Ok(self.control_on_interval(k, t - self.knots[k]))
    }

    pub fn control_on_interval(&self, k: usize, tau: f64) -> Vec<f64> {
        let h = self.knots[k + 1] - self.knots[k];
        let s = tau / h;
        let (u0, u1) = (&self.knot_controls[k], &self.knot_controls[k + 1]);
        match self.control_interp {
            ControlInterp::PiecewiseLinear => {
                u0.iter().zip(u1).map(|(a, b)| a + (b - a) * s).collect()
            }
            ControlInterp::PiecewiseQuadratic => {
                let uc = &self.mid_controls[k];
                let l0 = 2.0 * (s - 0.5) * (s - 1.0);
                let lc = -4.0 * s * (s - 1.0);
                let l1 = 2.0 * s * (s - 0.5);
                (0..self.n_u)
                    .map(|i| l0 * u0[i] + lc * uc[i] + l1 * u1[i])
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schemes::{hs_step, tz_step, HsForm, MidpointRule};

    fn one_interval_tz(order: usize, y: Vec<f64>, g: (f64, f64), h: f64) -> PolyTrajectory {
        let n_x = y.len();
        build_interpolant(
            SchemeId::trapezoidal(order),
            &InterpolantSamples {
                knots: vec![0.0, h],
                knot_states: vec![y, vec![0.0; n_x]],
                knot_g: vec![vec![g.0], vec![g.1]],
                mid_g: vec![],
                knot_controls: vec![vec![0.0], vec![2.0]],
                mid_controls: vec![],
            },
        )
        .unwrap()
    }

    #[test]
    fn tz2_constant_acceleration_is_quadratic() {
        let tr = one_interval_tz(2, vec![0.0, 0.0], (2.0, 2.0), 1.0);
        assert_eq!(tr.coeffs(0, 0).a, vec![0.0, 0.0, 2.0, 0.0]);
        assert_eq!(tr.eval_interpolant(0.5, 1).unwrap(), vec![1.0]);
        assert_eq!(tr.eval_interpolant(0.0, 0).unwrap(), vec![0.0]);
    }

    #[test]
    fn tz1_interpolation_polynomial() {
        // x_k + f_k tau + tau^2/(2h) (f_{k+1} - f_k) with x_k=1, f=(0,2), h=1.
        let tr = one_interval_tz(1, vec![1.0], (0.0, 2.0), 1.0);
        for tau in [0.0, 0.25, 0.5, 0.9, 1.0] {
            let v = tr.eval_interpolant(tau, 0).unwrap()[0];
            assert!((v - (1.0 + tau * tau)).abs() < 1e-15);
        }
    }

    #[test]
    fn tz2_linear_acceleration() {
        let tr = one_interval_tz(2, vec![0.0, 0.0], (0.0, 6.0), 1.0);
        assert!((tr.eval_interpolant(1.0, 2).unwrap()[0] - 6.0).abs() < 1e-14);
        assert!(tr.eval_interpolant(1.0, 3).is_err());
        assert_eq!(tr.eval_derivative(0.5, 3).unwrap(), vec![6.0]);
        assert_eq!(tr.eval_derivative(0.5, 4).unwrap(), vec![0.0]);
    }

    #[test]
    fn out_of_range_rejected() {
        let tr = one_interval_tz(2, vec![0.0, 0.0], (0.0, 6.0), 1.0);
        assert!(matches!(tr.eval_interpolant(1.5, 0), Err(Error::OutOfRange { .. })));
        assert!(tr.eval_control(-0.1).is_err());
    }

    #[test]
    fn linear_control() {
        let tr = one_interval_tz(2, vec![0.0, 0.0], (0.0, 6.0), 1.0);
        assert_eq!(tr.eval_control(0.5).unwrap(), vec![1.0]);
    }

    fn hs_controls(u: (f64, f64, f64)) -> PolyTrajectory {
        build_interpolant(
            SchemeId::hermite_simpson(2, HsForm::Separated),
            &InterpolantSamples {
                knots: vec![0.0, 1.0],
                knot_states: vec![vec![0.0, 0.0]; 2],
                knot_g: vec![vec![0.0]; 2],
                mid_g: vec![vec![0.0]],
                knot_controls: vec![vec![u.0], vec![u.2]],
                mid_controls: vec![vec![u.1]],
            },
        )
        .unwrap()
    }

    #[test]
    fn quadratic_control_nodes() {
        let tr = hs_controls((0.0, 1.0, 0.0));
        assert_eq!(tr.eval_control(0.5).unwrap(), vec![1.0]);
    }

    #[test]
    fn quadratic_control_vandermonde_oracle() {
        // Solve c0 + c1 t + c2 t^2 through (0,0), (0.5,1), (1,4) directly.
        let (t, y) = ([0.0, 0.5, 1.0], [0.0, 1.0, 4.0]);
        let mut m = [[0.0; 4]; 3];
        for r in 0..3 {
            m[r] = [1.0, t[r], t[r] * t[r], y[r]];
        }
        for p in 0..3 {
            for r in 0..3 {
                if r != p {
                    let f = m[r][p] / m[p][p];
                    for c in 0..4 {
                        m[r][c] -= f * m[p][c];
                    }
                }
            }
        }
        let c: Vec<f64> = (0..3).map(|r| m[r][3] / m[r][r]).collect();
        let expected = c[0] + c[1] * 0.25 + c[2] * 0.0625;
        let tr = hs_controls((0.0, 1.0, 4.0));
        let got = tr.eval_control(0.25).unwrap()[0];
        assert!((got - expected).abs() < 1e-14);
        assert!((got - 0.25).abs() < 1e-14);
    }

    #[test]
    fn endpoint_matches_step_bitwise() {
        let (y, g) = (vec![0.4, -0.3, 1.1], (0.9, -2.0, 0.35));
        let h = 0.23;
        let tz = tz_step(3, &y, g.0, g.2, h).unwrap();
        let samples = InterpolantSamples {
            knots: vec![0.0, h],
            knot_states: vec![y.clone(), vec![0.0; 3]],
            knot_g: vec![vec![g.0], vec![g.2]],
            mid_g: vec![],
            knot_controls: vec![vec![]; 2],
            mid_controls: vec![],
        };
        let tr = build_interpolant(SchemeId::trapezoidal(3), &samples).unwrap();
        for (j, expected) in tz.iter().enumerate() {
            assert_eq!(tr.eval_on_interval(0, h, j)[0], *expected);
        }

        let hs = hs_step(3, &y, &y, g.0, g.1, g.2, h, MidpointRule::Explicit).unwrap();
        let samples = InterpolantSamples {
            mid_g: vec![vec![g.1]],
            mid_controls: vec![vec![]],
            ..samples
        };
        let tr = build_interpolant(SchemeId::hermite_simpson(3, HsForm::Separated), &samples)
            .unwrap();
        for j in 0..3 {
            assert_eq!(tr.eval_on_interval(0, h, j)[0], hs.end[j]);
            assert_eq!(tr.eval_on_interval(0, 0.5 * h, j)[0], hs.mid[j]);
        }
    }

    #[test]
    fn inconsistent_samples_rejected() {
        let bad = InterpolantSamples {
            knots: vec![0.0, 1.0],
            knot_states: vec![vec![0.0, 0.0]],
            knot_g: vec![vec![0.0]; 2],
            mid_g: vec![],
            knot_controls: vec![vec![]; 2],
            mid_controls: vec![],
        };
        assert!(build_interpolant(SchemeId::trapezoidal(2), &bad).is_err());
        let missing_mid = InterpolantSamples {
            knot_states: vec![vec![0.0, 0.0]; 2],
            ..bad
        };
        assert!(build_interpolant(SchemeId::trapezoidal(2), &missing_mid).is_ok());
        assert!(build_interpolant(
            SchemeId::hermite_simpson(2, HsForm::Separated),
            &missing_mid
        )
        .is_err());
    }

    #[test]
    fn locate_assigns_knots_to_following_interval() {
        let samples = InterpolantSamples {
            knots: vec![0.0, 1.0, 2.0],
            knot_states: vec![vec![0.0]; 3],
            knot_g: vec![vec![0.0]; 3],
            knot_controls: vec![vec![]; 3],
            ..Default::default()
        };
        let tr = build_interpolant(SchemeId::trapezoidal(1), &samples).unwrap();
        assert_eq!(tr.locate(0.0).unwrap(), 0);
        assert_eq!(tr.locate(1.0).unwrap(), 1);
        assert_eq!(tr.locate(2.0).unwrap(), 1);
    }
}
