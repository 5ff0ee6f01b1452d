//! Collocation step equations for the trapezoidal and Hermite-Simpson families.
//!
//! Every scheme represents one coordinate on an interval `[t_k, t_k + h]` by
//! a polynomial in `tau = t - t_k` written in Taylor form
//!
//! ```text
//! q^(j)(tau) = sum_{i=j}^{d} a_i tau^(i-j) / (i-j)!
//! ```
//!
//! with `d = M + s - 1` (`s = 2` trapezoidal, `s = 3` Hermite-Simpson). The
//! first `M` coefficients are the initial derivative stack, the remaining
//! ones are fixed by collocating `q^(M) = g` at the collocation points. Step
//! predictions and interpolation share [`taylor_eval`], so both agree bit for
//! bit.

mod interp;

pub use interp::{build_interpolant, ControlInterp, InterpolantSamples, IntervalCoeffs, PolyTrajectory};

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Largest supported dynamics order. `M + 2` factorials stay exact in `u64`.
pub const MAX_ORDER: usize = 18;

const FACTORIALS: [u64; 21] = {
    let mut table = [1u64; 21];
    let mut n = 1;
    while n < 21 {
        table[n] = table[n - 1] * n as u64;
        n += 1;
    }
    table
};

/// Maximum number of Taylor coefficients (`d + 1` for Hermite-Simpson at `MAX_ORDER`).
pub(crate) const MAX_COEFFS: usize = MAX_ORDER + 3;

#[inline]
pub(crate) fn factorial(n: usize) -> f64 {
    FACTORIALS[n] as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Trapezoidal,
    HermiteSimpson,
}

/// Whether Hermite-Simpson midpoint states are decision variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum HsForm {
    #[default]
    Separated,
    Compressed,
}

/// How the Hermite-Simpson midpoint stack is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MidpointRule {
    /// Evaluate the interpolant at `h/2` with the supplied `g_c`.
    Explicit,
    /// Replace `g_c` by its value implied by the `q^(M-1)` endpoint equation,
    /// so the midpoint depends on `q^(M-1)_{k+1}` instead of `g_c`.
    #[default]
    Eliminated,
}

/// A collocation method: family, dynamics order, and Hermite-Simpson form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SchemeId {
    pub family: Family,
    pub order: usize,
    pub hs_form: HsForm,
}

impl SchemeId {
    pub fn trapezoidal(order: usize) -> Self {
        SchemeId {
            family: Family::Trapezoidal,
            order,
            hs_form: HsForm::Separated,
        }
    }

    pub fn hermite_simpson(order: usize, form: HsForm) -> Self {
        SchemeId {
            family: Family::HermiteSimpson,
            order,
            hs_form: form,
        }
    }

    /// Collocation points per interval.
    pub fn collocation_points(&self) -> usize {
        match self.family {
            Family::Trapezoidal => 2,
            Family::HermiteSimpson => 3,
        }
    }

    /// Polynomial degree per interval, `M + s - 1`.
    pub fn degree(&self) -> usize {
        self.order + self.collocation_points() - 1
    }

    pub fn validate(&self) -> Result<()> {
        validate_order(self.order)
    }

    /// Short name such as `tz2` or `hs1`.
    pub fn label(&self) -> String {
        let prefix = match self.family {
            Family::Trapezoidal => "tz",
            Family::HermiteSimpson => "hs",
        };
        format!("{prefix}{}", self.order)
    }
}

fn validate_order(order: usize) -> Result<()> {
    if order == 0 {
        return Err(Error::InvalidInput("dynamics order must be at least 1".into()));
    }
    if order > MAX_ORDER {
        return Err(Error::InvalidInput(format!(
            "dynamics order {order} exceeds the supported maximum {MAX_ORDER}"
        )));
    }
    Ok(())
}

fn validate_step(order: usize, h: f64) -> Result<()> {
    validate_order(order)?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!("step h must be positive, got {h}")));
    }
    Ok(())
}

/// Evaluates the `j`-th derivative of the Taylor-form polynomial `a` at `tau`.
#[inline]
pub fn taylor_eval(a: &[f64], tau: f64, j: usize) -> f64 {
    if j >= a.len() {
        return 0.0;
    }
    let mut acc = 0.0;
    let mut pow = 1.0;
    for (m, &coef) in a[j..].iter().enumerate() {
        acc += coef * pow / factorial(m);
        pow *= tau;
    }
    acc
}

/// Fills `a[0..M+2]` with trapezoidal coefficients.
#[inline]
pub(crate) fn tz_coeffs_into(y_k: &[f64], g_k: f64, g_k1: f64, h: f64, a: &mut [f64]) {
    let m = y_k.len();
    a[..m].copy_from_slice(y_k);
    a[m] = g_k;
    a[m + 1] = (g_k1 - g_k) / h;
}

/// Fills `a[0..M+3]` with Hermite-Simpson coefficients.
#[inline]
pub(crate) fn hs_coeffs_into(y_k: &[f64], g_k: f64, g_c: f64, g_k1: f64, h: f64, a: &mut [f64]) {
    let m = y_k.len();
    a[..m].copy_from_slice(y_k);
    a[m] = g_k;
    a[m + 1] = -(3.0 * g_k - 4.0 * g_c + g_k1) / h;
    a[m + 2] = 4.0 * (g_k - 2.0 * g_c + g_k1) / (h * h);
}

/// `g_c` implied by the `q^(M-1)` endpoint equation of Hermite-Simpson.
#[inline]
pub fn eliminated_midpoint_g(top_k: f64, top_k1: f64, g_k: f64, g_k1: f64, h: f64) -> f64 {
    3.0 * (top_k1 - top_k) / (2.0 * h) - (g_k + g_k1) / 4.0
}

/// Trapezoidal Taylor coefficients `a_0..a_{M+1}` for one coordinate.
pub fn tz_coeffs(y_k: &[f64], g_k: f64, g_k1: f64, h: f64) -> Result<Vec<f64>> {
    validate_step(y_k.len(), h)?;
    let mut a = vec![0.0; y_k.len() + 2];
    tz_coeffs_into(y_k, g_k, g_k1, h, &mut a);
    Ok(a)
}

/// Hermite-Simpson Taylor coefficients `a_0..a_{M+2}` for one coordinate.
pub fn hs_coeffs(y_k: &[f64], g_k: f64, g_c: f64, g_k1: f64, h: f64) -> Result<Vec<f64>> {
    validate_step(y_k.len(), h)?;
    let mut a = vec![0.0; y_k.len() + 3];
    hs_coeffs_into(y_k, g_k, g_c, g_k1, h, &mut a);
    Ok(a)
}

/// Generalized trapezoidal step: the derivative stack at `t_{k+1}`.
///
/// `y_k` holds `(q_k, q'_k, ..., q^(M-1)_k)` for one coordinate.
pub fn tz_step(order: usize, y_k: &[f64], g_k: f64, g_k1: f64, h: f64) -> Result<Vec<f64>> {
    validate_step(order, h)?;
    check_len("y_k", order, y_k.len())?;
    let mut out = vec![0.0; order];
    tz_step_into(y_k, g_k, g_k1, h, &mut out);
    Ok(out)
}

#[inline]
pub(crate) fn tz_step_into(y_k: &[f64], g_k: f64, g_k1: f64, h: f64, out: &mut [f64]) {
    let m = y_k.len();
    let mut a = [0.0; MAX_COEFFS];
    tz_coeffs_into(y_k, g_k, g_k1, h, &mut a);
    for (j, o) in out.iter_mut().enumerate() {
        *o = taylor_eval(&a[..m + 2], h, j);
    }
}

/// Result of a Hermite-Simpson step.
#[derive(Debug, Clone, PartialEq)]
pub struct HsStep {
    /// Stack at `t_{k+1}`.
    pub end: Vec<f64>,
    /// Stack at `t_c = t_k + h/2`.
    pub mid: Vec<f64>,
}

/// Generalized Hermite-Simpson step.
///
/// `y_k1` is the trial stack at `t_{k+1}`; only its last level is read, and
/// only under [`MidpointRule::Eliminated`].
#[allow(clippy::too_many_arguments)]
pub fn hs_step(
    order: usize,
    y_k: &[f64],
    y_k1: &[f64],
    g_k: f64,
    g_c: f64,
    g_k1: f64,
    h: f64,
    rule: MidpointRule,
) -> Result<HsStep> {
    validate_step(order, h)?;
    check_len("y_k", order, y_k.len())?;
    check_len("y_k1", order, y_k1.len())?;
    let mut end = vec![0.0; order];
    let mut mid = vec![0.0; order];
    hs_end_into(y_k, g_k, g_c, g_k1, h, &mut end);
    let g_mid = match rule {
        MidpointRule::Explicit => g_c,
        MidpointRule::Eliminated => {
            eliminated_midpoint_g(y_k[order - 1], y_k1[order - 1], g_k, g_k1, h)
        }
    };
    hs_mid_into(y_k, g_k, g_mid, g_k1, h, &mut mid);
    Ok(HsStep { end, mid })
}

#[inline]
pub(crate) fn hs_end_into(y_k: &[f64], g_k: f64, g_c: f64, g_k1: f64, h: f64, out: &mut [f64]) {
    let m = y_k.len();
    let mut a = [0.0; MAX_COEFFS];
    hs_coeffs_into(y_k, g_k, g_c, g_k1, h, &mut a);
    for (j, o) in out.iter_mut().enumerate() {
        *o = taylor_eval(&a[..m + 3], h, j);
    }
}

#[inline]
pub(crate) fn hs_mid_into(y_k: &[f64], g_k: f64, g_c: f64, g_k1: f64, h: f64, out: &mut [f64]) {
    let m = y_k.len();
    let mut a = [0.0; MAX_COEFFS];
    hs_coeffs_into(y_k, g_k, g_c, g_k1, h, &mut a);
    for (j, o) in out.iter_mut().enumerate() {
        *o = taylor_eval(&a[..m + 3], 0.5 * h, j);
    }
}
