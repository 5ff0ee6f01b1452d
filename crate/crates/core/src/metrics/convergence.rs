//! Empirical order of accuracy on problems with a known or integrated reference.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ode::{dopri5, OdeOptions};
use crate::error::{check_len, Error, Result};
use crate::model::{lift_to_first_order, OcpDefinition};
use crate::schemes::{
    eliminated_midpoint_g, hs_end_into, hs_mid_into, tz_step_into, Family, SchemeId, MAX_ORDER,
};
use crate::solver::finite_diff_jacobian;
use crate::solver::FdOptions;

/// Control signal `t -> u(t)` driving the system during the study.
pub type ControlFn = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;
/// Reference state trajectory `t -> x(t)`.
pub type ReferenceFn = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// What to march and what to compare against.
#[derive(Clone)]
pub struct ConvergenceSetup {
    pub ocp: OcpDefinition,
    pub scheme: SchemeId,
    /// Initial state (level-major stack).
    pub x0: Vec<f64>,
    pub control: ControlFn,
    /// Exact solution; integrated with [`dopri5`] at tolerance 1e-12 when absent.
    pub reference: Option<ReferenceFn>,
}

impl fmt::Debug for ConvergenceSetup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConvergenceSetup")
            .field("ocp", &self.ocp)
            .field("scheme", &self.scheme)
            .field("x0", &self.x0)
            .field("reference", &self.reference.is_some())
            .finish()
    }
}

/// Fitted log-log slope, or `Exact` when every error sits at roundoff level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Slope {
    Exact,
    Fitted(f64),
}

impl Slope {
    pub fn value(&self) -> Option<f64> {
        match self {
            Slope::Exact => None,
            Slope::Fitted(s) => Some(*s),
        }
    }
}

impl fmt::Display for Slope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slope::Exact => write!(f, "exact"),
            Slope::Fitted(s) => write!(f, "{s:.3}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    /// Largest one-step configuration error over intervals started on the
    /// reference.
    pub local_error: f64,
    /// Largest configuration deviation from the reference when marching all
    /// intervals.
    pub global_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub method: String,
    pub rows: Vec<ConvergenceRow>,
    /// Slope of local error against `h`, about `p + 1` for order `p`.
    pub local_slope: Slope,
    pub global_slope: Slope,
}

/// Least-squares slope of `ln err` against `ln h`. Errors below
/// `64 eps * scale` are treated as roundoff and excluded; with fewer than two
/// usable points the result is [`Slope::Exact`].
pub fn fit_slope(h: &[f64], err: &[f64], scale: f64) -> Slope {
    let floor = 64.0 * f64::EPSILON * scale.max(1.0);
    let pts: Vec<(f64, f64)> = h
        .iter()
        .zip(err)
        .filter(|(_, e)| **e > floor)
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return Slope::Exact;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Slope::Fitted(sxy / sxx)
}

fn effective_ocp(ocp: &OcpDefinition, scheme: SchemeId) -> Result<OcpDefinition> {
    scheme.validate()?;
    if scheme.order == ocp.order() {
        Ok(ocp.clone())
    } else if scheme.order == 1 {
        Ok(lift_to_first_order(ocp))
    } else {
        Err(Error::OrderMismatch {
            scheme: scheme.order,
            problem: ocp.order(),
        })
    }
}

/// Collocation-predicted stack at `t_k + h` minus `y`, for one interval.
#[allow(clippy::too_many_arguments)]
fn step_residual(
    ocp: &OcpDefinition,
    scheme: SchemeId,
    control: &ControlFn,
    t_k: f64,
    h: f64,
    x_k: &[f64],
    y: &[f64],
    out: &mut [f64],
) {
    let (n_q, m) = (ocp.n_q(), ocp.order());
    let mut g_k = vec![0.0; n_q];
    let mut g_k1 = vec![0.0; n_q];
    ocp.dynamics_into(x_k, &control(t_k), t_k, &mut g_k);
    ocp.dynamics_into(y, &control(t_k + h), t_k + h, &mut g_k1);
    let mut yk = [0.0; MAX_ORDER];
    let mut pred = [0.0; MAX_ORDER];
    let column = |x: &[f64], i: usize, buf: &mut [f64; MAX_ORDER]| {
        for j in 0..m {
            buf[j] = x[j * n_q + i];
        }
    };
    let g_c = if scheme.family == Family::HermiteSimpson {
        let mut xc = vec![0.0; n_q * m];
        for i in 0..n_q {
            column(x_k, i, &mut yk);
            let gc = eliminated_midpoint_g(yk[m - 1], y[(m - 1) * n_q + i], g_k[i], g_k1[i], h);
            hs_mid_into(&yk[..m], g_k[i], gc, g_k1[i], h, &mut pred[..m]);
            for j in 0..m {
                xc[j * n_q + i] = pred[j];
            }
        }
        let mut g_c = vec![0.0; n_q];
        let t_c = t_k + 0.5 * h;
        ocp.dynamics_into(&xc, &control(t_c), t_c, &mut g_c);
        Some(g_c)
    } else {
        None
    };
    for i in 0..n_q {
        column(x_k, i, &mut yk);
        match &g_c {
            Some(g_c) => hs_end_into(&yk[..m], g_k[i], g_c[i], g_k1[i], h, &mut pred[..m]),
            None => tz_step_into(&yk[..m], g_k[i], g_k1[i], h, &mut pred[..m]),
        }
        for j in 0..m {
            out[j * n_q + i] = pred[j] - y[j * n_q + i];
        }
    }
}

/// Dense Gaussian elimination with partial pivoting; `None` if singular.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c] == 0.0 || !a[p][c].is_finite() {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    for c in (0..n).rev() {
        let s: f64 = (c + 1..n).map(|k| a[c][k] * b[k]).sum();
        b[c] = (b[c] - s) / a[c][c];
    }
    Some(b)
}

/// Solves one interval's implicit collocation equations for the end state,
/// starting Newton from `guess`.
fn implicit_step(
    ocp: &OcpDefinition,
    scheme: SchemeId,
    control: &ControlFn,
    t_k: f64,
    h: f64,
    x_k: &[f64],
    guess: &[f64],
) -> Result<Vec<f64>> {
    let n = x_k.len();
    let f = |y: &[f64], out: &mut [f64]| step_residual(ocp, scheme, control, t_k, h, x_k, y, out);
    let mut y = guess.to_vec();
    let mut r = vec![0.0; n];
    f(&y, &mut r);
    for _ in 0..50 {
        let jac = finite_diff_jacobian(f, n, &y, &FdOptions::default())?;
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let Some(dy) = solve_dense(jac, rhs) else {
            return Err(Error::InvalidInput("singular step Jacobian".into()));
        };
        for (yi, d) in y.iter_mut().zip(&dy) {
            *yi += d;
        }
        f(&y, &mut r);
        let size = y.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if dy.iter().all(|d| d.abs() <= 4.0 * f64::EPSILON * size) {
            break;
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index: 0 });
    }
    Ok(y)
}

/// One-step error of `scheme` on `[t_k, t_k + h]` started from `x_k`,
/// measured against `x_ref` at `t_k + h` in the infinity norm over the
/// configuration coordinates `q`.
pub fn local_step_error(
    ocp: &OcpDefinition,
    scheme: SchemeId,
    control: &ControlFn,
    t_k: f64,
    h: f64,
    x_k: &[f64],
    x_ref: &[f64],
) -> Result<f64> {
    let ocp = effective_ocp(ocp, scheme)?;
    check_len("state", ocp.n_x(), x_k.len())?;
    let y = implicit_step(&ocp, scheme, control, t_k, h, x_k, x_ref)?;
    Ok(config_error(&y, x_ref, ocp.source_n_q()))
}

fn config_error(y: &[f64], x_ref: &[f64], n_q: usize) -> f64 {
    y[..n_q].iter().zip(x_ref).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}

/// Reference states at the knots of a uniform `n`-interval mesh.
fn reference_states(setup: &ConvergenceSetup, ocp: &OcpDefinition, n: usize) -> Result<Vec<Vec<f64>>> {
    let t_f = ocp.t_f();
    let knot = |k: usize| t_f * k as f64 / n as f64;
    if let Some(r) = &setup.reference {
        return (0..=n)
            .map(|k| {
                let x = r(knot(k));
                check_len("reference state", ocp.n_x(), x.len())?;
                Ok(x)
            })
            .collect();
    }
    let first = lift_to_first_order(ocp);
    let control = setup.control.clone();
    let rhs = |t: f64, x: &[f64], out: &mut [f64]| first.dynamics_into(x, &control(t), t, out);
    let mut states = vec![setup.x0.clone()];
    for k in 0..n {
        let next = dopri5(rhs, knot(k), &states[k], knot(k + 1), &OdeOptions::default())?;
        states.push(next);
    }
    Ok(states)
}

/// Measures local and global errors for each mesh size in `n_list`
/// (strictly increasing, at least three entries) and fits log-log slopes.
pub fn convergence_study(setup: &ConvergenceSetup, n_list: &[usize]) -> Result<ConvergenceTable> {
    if n_list.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "a convergence study needs at least 3 mesh sizes, got {}",
            n_list.len()
        )));
    }
    if n_list[0] == 0 || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("mesh sizes must be positive and increasing".into()));
    }
    let ocp = effective_ocp(&setup.ocp, setup.scheme)?;
    check_len("initial state", ocp.n_x(), setup.x0.len())?;
    let t_f = ocp.t_f();
    let n_q = ocp.source_n_q();
    let mut rows = Vec::with_capacity(n_list.len());
    let mut scale = 1.0f64;
    for &n in n_list {
        let h = t_f / n as f64;
        let refs = reference_states(setup, &ocp, n)?;
        let knot = |k: usize| t_f * k as f64 / n as f64;
        let mut local = 0.0f64;
        let mut global = 0.0f64;
        let mut x = setup.x0.clone();
        for k in 0..n {
            let width = knot(k + 1) - knot(k);
            let y = implicit_step(&ocp, setup.scheme, &setup.control, knot(k), width, &refs[k], &refs[k + 1])?;
            local = local.max(config_error(&y, &refs[k + 1], n_q));
            x = implicit_step(&ocp, setup.scheme, &setup.control, knot(k), width, &x, &refs[k + 1])?;
            global = global.max(config_error(&x, &refs[k + 1], n_q));
            scale = refs[k + 1][..n_q].iter().fold(scale, |m, v| m.max(v.abs()));
        }
        rows.push(ConvergenceRow {
            n,
            h,
            local_error: local,
            global_error: global,
        });
    }
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let local: Vec<f64> = rows.iter().map(|r| r.local_error).collect();
    let global: Vec<f64> = rows.iter().map(|r| r.global_error).collect();
    Ok(ConvergenceTable {
        method: setup.scheme.label(),
        local_slope: fit_slope(&hs, &local, scale),
        global_slope: fit_slope(&hs, &global, scale),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{oscillator_exact, oscillator_with};
    use crate::schemes::HsForm;

    fn oscillator_setup(scheme: SchemeId, analytic: bool) -> ConvergenceSetup {
        ConvergenceSetup {
            ocp: oscillator_with(1.0, 1.0, 0.0, 1.0).unwrap(),
            scheme,
            x0: vec![1.0, 0.0],
            control: Arc::new(|_| vec![0.0]),
            reference: analytic.then(|| oscillator_exact(1.0, 1.0, 0.0)),
        }
    }

    #[test]
    fn slope_fit_recovers_power_law() {
        let h = [0.1, 0.05, 0.025];
        let e: Vec<f64> = h.iter().map(|h: &f64| 3.0 * h.powi(4)).collect();
        assert!((fit_slope(&h, &e, 1.0).value().unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(fit_slope(&h, &[0.0, 1e-17, 0.0], 1.0), Slope::Exact);
    }

    #[test]
    fn tz2_local_order() {
        let t = convergence_study(&oscillator_setup(SchemeId::trapezoidal(2), true), &[4, 8, 16, 32])
            .unwrap();
        assert!(t.local_slope.value().unwrap() >= 3.9, "{t:?}");
    }

    #[test]
    fn integrated_reference_matches_analytic() {
        let s = SchemeId::hermite_simpson(1, HsForm::Separated);
        let a = convergence_study(&oscillator_setup(s, true), &[4, 8, 16]).unwrap();
        let b = convergence_study(&oscillator_setup(s, false), &[4, 8, 16]).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert!((ra.local_error - rb.local_error).abs() < 1e-10);
        }
    }

    fn polynomial_setup(scheme: SchemeId, degree: i32) -> ConvergenceSetup {
        let d = degree as f64;
        let ocp = OcpDefinition::new(
            "poly",
            1,
            0,
            2,
            1.0,
            Arc::new(move |_, _, t, o| o[0] = d * (d - 1.0) * t.powi(degree - 2)),
        )
        .unwrap();
        ConvergenceSetup {
            ocp,
            scheme,
            x0: vec![0.0, 0.0],
            control: Arc::new(|_| vec![]),
            reference: Some(Arc::new(move |t: f64| vec![t.powi(degree), d * t.powi(degree - 1)])),
        }
    }

    #[test]
    fn exactness_classes_of_second_order_schemes() {
        let hs2 = SchemeId::hermite_simpson(2, HsForm::Separated);
        let tz2 = SchemeId::trapezoidal(2);
        // Cubic: both exact. Quartic: only Hermite-Simpson.
        for (scheme, degree, exact) in [(tz2, 3, true), (hs2, 3, true), (hs2, 4, true), (tz2, 4, false)] {
            let t = convergence_study(&polynomial_setup(scheme, degree), &[2, 4, 8]).unwrap();
            if exact {
                assert_eq!(t.local_slope, Slope::Exact, "{scheme:?} {degree}");
                assert!(t.rows.iter().all(|r| r.global_error < 1e-13));
            } else {
                assert!(t.rows.iter().all(|r| r.local_error > 1e-6));
            }
        }
    }

    #[test]
    fn rejects_short_lists() {
        let s = oscillator_setup(SchemeId::trapezoidal(2), true);
        assert!(convergence_study(&s, &[4, 8]).is_err());
        assert!(convergence_study(&s, &[8, 4, 16]).is_err());
    }
}
