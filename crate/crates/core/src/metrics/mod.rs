//! Dynamic-error diagnostics of reconstructed trajectories.
//!
//! `eps1` measures how far the configuration interpolant's derivative is from
//! the separately interpolated velocity (nonzero only for lifted first-order
//! schemes). `eps2` measures how far the interpolant's highest derivative is
//! from the dynamics evaluated along the interpolant itself.

mod convergence;
mod ode;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::OcpDefinition;
use crate::schemes::PolyTrajectory;

pub use convergence::{
    convergence_study, fit_slope, local_step_error, ConvergenceRow, ConvergenceSetup,
    ConvergenceTable, Slope,
};
pub use ode::{dopri5, OdeOptions};

/// Default number of Simpson subintervals per mesh interval.
pub const DEFAULT_SAMPLES_PER_INTERVAL: usize = 64;

/// How the trajectory relates to the problem's configuration coordinates.
struct View {
    /// Configuration coordinates of the source problem.
    n_q: usize,
    /// Order of the source problem.
    order: usize,
    /// Trajectory is a first-order lift of a higher-order problem.
    lifted: bool,
}

fn view(traj: &PolyTrajectory, ocp: &OcpDefinition) -> Result<View> {
    let (n_q, order) = (ocp.source_n_q(), ocp.source_order());
    let lifted = traj.order() == 1 && order > 1;
    let expected = if lifted { n_q * order } else { n_q };
    if traj.n_q() != expected || (!lifted && traj.order() != order) {
        return Err(Error::InvalidInput(format!(
            "trajectory with {} coordinates of order {} does not belong to problem `{}`",
            traj.n_q(),
            traj.order(),
            ocp.name()
        )));
    }
    if traj.n_u() != ocp.n_u() {
        return Err(Error::DimensionMismatch {
            what: "trajectory controls",
            expected: ocp.n_u(),
            got: traj.n_u(),
        });
    }
    Ok(View { n_q, order, lifted })
}

/// `(eps1, eps2)` on interval `k` at offset `tau`, using that interval's polynomial.
fn errors_on_interval(
    traj: &PolyTrajectory,
    ocp: &OcpDefinition,
    v: &View,
    k: usize,
    tau: f64,
) -> (Vec<f64>, Vec<f64>) {
    let t = traj.knots()[k] + tau;
    let u = traj.control_on_interval(k, tau);
    // Derivative stack of the configuration interpolant, level-major.
    let mut stack = Vec::with_capacity(v.n_q * v.order);
    for r in 0..v.order {
        stack.extend_from_slice(&traj.eval_on_interval(k, tau, r)[..v.n_q]);
    }
    let top = traj.eval_on_interval(k, tau, v.order);
    let mut g = vec![0.0; ocp.n_q()];
    ocp.dynamics_into(&stack, &u, t, &mut g);
    // The lifted dynamics returns the chain first and g last.
    let g = &g[g.len() - v.n_q..];
    let eps2: Vec<f64> = (0..v.n_q).map(|i| top[i] - g[i]).collect();
    let eps1 = if v.lifted {
        let values = traj.eval_on_interval(k, tau, 0);
        let dq = traj.eval_on_interval(k, tau, 1);
        (0..v.n_q).map(|i| dq[i] - values[v.n_q + i]).collect()
    } else if v.order == 1 {
        eps2.clone()
    } else {
        vec![0.0; v.n_q]
    };
    (eps1, eps2)
}

/// Pointwise dynamic error of order `r` at time `t`.
///
/// `ocp` is the problem the trajectory was built for (the lifted one for
/// first-order schemes on higher-order problems). For `r = 2` the result is
/// `q^(M) - g(q, ..., q^(M-1), u, t)` along the configuration interpolant,
/// which for second-order problems is the acceleration error. First-order
/// problems have a single error, returned for both `r`.
pub fn dynamic_error(traj: &PolyTrajectory, ocp: &OcpDefinition, r: usize, t: f64) -> Result<Vec<f64>> {
    if r != 1 && r != 2 {
        return Err(Error::InvalidInput(format!("dynamic error order must be 1 or 2, got {r}")));
    }
    let v = view(traj, ocp)?;
    let k = traj.locate(t)?;
    let (e1, e2) = errors_on_interval(traj, ocp, &v, k, t - traj.knots()[k]);
    Ok(if r == 1 { e1 } else { e2 })
}

/// Derivative `r <= M` of the configuration coordinates at `t`, in the
/// source problem's coordinates even when the trajectory is a first-order lift.
pub fn configuration_derivative(
    traj: &PolyTrajectory,
    ocp: &OcpDefinition,
    t: f64,
    r: usize,
) -> Result<Vec<f64>> {
    let v = view(traj, ocp)?;
    if r > v.order {
        return Err(Error::InvalidInput(format!(
            "derivative order {r} exceeds the problem order {}",
            v.order
        )));
    }
    if !v.lifted {
        return Ok(traj.eval_interpolant(t, r)?[..v.n_q].to_vec());
    }
    let (level, offset) = if r < v.order { (0, r * v.n_q) } else { (1, (v.order - 1) * v.n_q) };
    Ok(traj.eval_interpolant(t, level)?[offset..offset + v.n_q].to_vec())
}

/// Sampled dynamic errors and their integrals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// Sample times; interior knots appear twice, as right end of one
    /// interval and left end of the next.
    pub sample_times: Vec<f64>,
    /// `eps1[i][s]`: coordinate `i`, sample `s`.
    pub eps1: Vec<Vec<f64>>,
    pub eps2: Vec<Vec<f64>>,
    /// Integral of `|eps1|` per coordinate.
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
    /// Integral of the summed absolute errors, when all units agree.
    pub e1_joint: Option<f64>,
    pub e2_joint: Option<f64>,
    pub units: Vec<String>,
    pub samples_per_interval: usize,
}

impl ErrorReport {
    pub fn unit_mismatch(&self) -> bool {
        self.units.windows(2).any(|w| w[0] != w[1])
    }

    /// Joint integrals, or [`Error::UnitMismatch`] when units differ.
    pub fn joint(&self) -> Result<(f64, f64)> {
        match (self.e1_joint, self.e2_joint) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(Error::UnitMismatch(self.units.clone())),
        }
    }

    pub fn max_abs_eps1(&self) -> f64 {
        max_abs(&self.eps1)
    }

    pub fn max_abs_eps2(&self) -> f64 {
        max_abs(&self.eps2)
    }

    /// CSV with header `t,eps1_q1..,eps2_q1..`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n_q = self.e1.len();
        let mut header = vec!["t".to_string()];
        header.extend((1..=n_q).map(|i| format!("eps1_q{i}")));
        header.extend((1..=n_q).map(|i| format!("eps2_q{i}")));
        writeln!(w, "{}", header.join(","))?;
        for (s, t) in self.sample_times.iter().enumerate() {
            let mut row = vec![fmt_f64(*t)];
            row.extend(self.eps1.iter().map(|c| fmt_f64(c[s])));
            row.extend(self.eps2.iter().map(|c| fmt_f64(c[s])));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn max_abs(v: &[Vec<f64>]) -> f64 {
    v.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
}

/// Round-trip exact decimal formatting used in every CSV artifact.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Samples both dynamic errors on every interval and integrates their
/// absolute values with composite Simpson on `samples_per_interval`
/// uniform subintervals (rounded up to even, at least 8).
pub fn integrate_errors(
    traj: &PolyTrajectory,
    ocp: &OcpDefinition,
    samples_per_interval: usize,
) -> Result<ErrorReport> {
    if samples_per_interval < 8 {
        return Err(Error::InvalidInput(format!(
            "samples_per_interval must be at least 8, got {samples_per_interval}"
        )));
    }
    let m = samples_per_interval + samples_per_interval % 2;
    let v = view(traj, ocp)?;
    let n = traj.n_intervals();
    let units = ocp.units().to_vec();
    let same_units = !units.windows(2).any(|w| w[0] != w[1]);

    let total = n * (m + 1);
    let mut times = Vec::with_capacity(total);
    let mut eps1 = vec![Vec::with_capacity(total); v.n_q];
    let mut eps2 = vec![Vec::with_capacity(total); v.n_q];
    let mut e1 = vec![0.0; v.n_q];
    let mut e2 = vec![0.0; v.n_q];
    let (mut j1, mut j2) = (0.0, 0.0);
    for k in 0..n {
        let t0 = traj.knots()[k];
        let h = traj.knots()[k + 1] - t0;
        let dt = h / m as f64;
        for s in 0..=m {
            let tau = if s == m { h } else { s as f64 * dt };
            let (a, b) = errors_on_interval(traj, ocp, &v, k, tau);
            let w = dt / 3.0 * if s == 0 || s == m { 1.0 } else if s % 2 == 1 { 4.0 } else { 2.0 };
            times.push(t0 + tau);
            for i in 0..v.n_q {
                e1[i] += w * a[i].abs();
                e2[i] += w * b[i].abs();
                eps1[i].push(a[i]);
                eps2[i].push(b[i]);
            }
            j1 += w * a.iter().map(|x| x.abs()).sum::<f64>();
            j2 += w * b.iter().map(|x| x.abs()).sum::<f64>();
        }
    }
    Ok(ErrorReport {
        sample_times: times,
        eps1,
        eps2,
        e1,
        e2,
        e1_joint: same_units.then_some(j1),
        e2_joint: same_units.then_some(j2),
        units,
        samples_per_interval: m,
    })
}

/// Largest `|eps2|` over knots (and Hermite-Simpson midpoints), the points
/// where collocation enforces the dynamics.
pub fn collocation_point_eps2(traj: &PolyTrajectory, ocp: &OcpDefinition) -> Result<f64> {
    let v = view(traj, ocp)?;
    let hs = traj.scheme().family == crate::schemes::Family::HermiteSimpson;
    let mut worst = 0.0f64;
    for k in 0..traj.n_intervals() {
        let h = traj.knots()[k + 1] - traj.knots()[k];
        let mut taus = vec![0.0, h];
        if hs {
            taus.push(0.5 * h);
        }
        for tau in taus {
            let (_, e2) = errors_on_interval(traj, ocp, &v, k, tau);
            worst = e2.iter().fold(worst, |m, x| m.max(x.abs()));
        }
    }
    Ok(worst)
}

/// Largest jump of the `r`-th derivative of any coordinate across interior knots.
pub fn derivative_jump(traj: &PolyTrajectory, r: usize) -> f64 {
    let mut worst = 0.0f64;
    for k in 1..traj.n_intervals() {
        let h = traj.knots()[k] - traj.knots()[k - 1];
        let left = traj.eval_on_interval(k - 1, h, r);
        let right = traj.eval_on_interval(k, 0.0, r);
        for (a, b) in left.iter().zip(&right) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}
