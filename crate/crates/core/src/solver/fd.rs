//! Central finite differences.

use crate::error::{Error, Result};

/// Step control for finite differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdOptions {
    /// Relative step; the step for variable `i` is `rel_step * max(1, |x_i|)`.
    pub rel_step: f64,
}

impl Default for FdOptions {
    fn default() -> Self {
        FdOptions {
            rel_step: f64::EPSILON.cbrt(),
        }
    }
}

#[inline]
pub(crate) fn step_for(rel: f64, x: f64) -> f64 {
    let h = rel * x.abs().max(1.0);
    // Make x + h exactly representable so the divisor matches the perturbation.
    (x + h) - x
}

/// Gradient of a scalar function by central differences.
pub fn finite_diff_gradient<F>(f: F, x: &[f64], opts: &FdOptions) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let mut work = x.to_vec();
    let mut grad = vec![0.0; x.len()];
    for i in 0..x.len() {
        let h = step_for(opts.rel_step, x[i]);
        work[i] = x[i] + h;
        let fp = f(&work);
        work[i] = x[i] - h;
        let fm = f(&work);
        work[i] = x[i];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFinite { index: i });
        }
        grad[i] = (fp - fm) / (2.0 * h);
    }
    Ok(grad)
}

/// Jacobian of a vector function by central differences, as `n_out` rows.
pub fn finite_diff_jacobian<F>(
    f: F,
    n_out: usize,
    x: &[f64],
    opts: &FdOptions,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64], &mut [f64]),
{
    let mut flat = vec![0.0; n_out * x.len()];
    let mut work = x.to_vec();
    jacobian_into(&f, n_out, &mut work, opts.rel_step, &mut flat)?;
    Ok(flat.chunks(x.len().max(1)).take(n_out).map(<[f64]>::to_vec).collect())
}

/// Row-major central-difference Jacobian. `work` holds the evaluation point
/// on entry and is restored on exit.
pub(crate) fn jacobian_into<F>(
    f: &F,
    n_out: usize,
    work: &mut [f64],
    rel_step: f64,
    jac: &mut [f64],
) -> Result<()>
where
    F: Fn(&[f64], &mut [f64]) + ?Sized,
{
    let n = work.len();
    let mut fp = vec![0.0; n_out];
    let mut fm = vec![0.0; n_out];
    for i in 0..n {
        let xi = work[i];
        let h = step_for(rel_step, xi);
        work[i] = xi + h;
        f(work, &mut fp);
        work[i] = xi - h;
        f(work, &mut fm);
        work[i] = xi;
        if fp.iter().chain(&fm).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
        let inv = 1.0 / (2.0 * h);
        for r in 0..n_out {
            jac[r * n + i] = (fp[r] - fm[r]) * inv;
        }
    }
    Ok(())
}

/// Hessian of a scalar function by second differences, restricted to the
/// `pairs` (with `p >= q`) of local indices. Returns values in pair order.
pub(crate) fn hessian_pairs<F>(
    f: &F,
    work: &mut [f64],
    rel_step: f64,
    pairs: &[(usize, usize)],
    out: &mut [f64],
) where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let f0 = f(work);
    for (slot, &(p, q)) in out.iter_mut().zip(pairs) {
        let (xp, xq) = (work[p], work[q]);
        let hp = step_for(rel_step, xp);
        if p == q {
            work[p] = xp + hp;
            let fp = f(work);
            work[p] = xp - hp;
            let fm = f(work);
            work[p] = xp;
            *slot = (fp - 2.0 * f0 + fm) / (hp * hp);
        } else {
            let hq = step_for(rel_step, xq);
            let mut corner = |sp: f64, sq: f64| {
                work[p] = xp + sp * hp;
                work[q] = xq + sq * hq;
                f(work)
            };
            let fpp = corner(1.0, 1.0);
            let fpm = corner(1.0, -1.0);
            let fmp = corner(-1.0, 1.0);
            let fmm = corner(-1.0, -1.0);
            work[p] = xp;
            work[q] = xq;
            *slot = (fpp - fpm - fmp + fmm) / (4.0 * hp * hq);
        }
    }
}
