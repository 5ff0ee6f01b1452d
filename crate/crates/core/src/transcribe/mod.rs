//! Transcription of a continuous problem into a block-structured NLP.
//!
//! Decision variables are stored node by node in time order. A node is a
//! knot `(x_k, u_k)` or, for Hermite-Simpson, a midpoint: `(x_c, u_c)` in
//! separated form and `u_c` alone in compressed form. Every interval's
//! variables are therefore contiguous, which keeps the constraint Jacobian
//! banded.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::model::{lift_to_first_order, Bound, OcpDefinition};
use crate::schemes::{
    build_interpolant, eliminated_midpoint_g, hs_end_into, hs_mid_into, tz_step_into, Family,
    HsForm, InterpolantSamples, PolyTrajectory, SchemeId, MAX_ORDER,
};
use crate::solver::{eval_constraints, eval_cost, BlockKind, BlockSpec, Problem};

/// Uniform mesh over `[0, t_f]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    n: usize,
    t_f: f64,
}

impl Mesh {
    pub fn new(n: usize, t_f: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("mesh needs at least one interval".into()));
        }
        if !(t_f > 0.0 && t_f.is_finite()) {
            return Err(Error::InvalidInput(format!("t_f must be positive, got {t_f}")));
        }
        Ok(Mesh { n, t_f })
    }

    pub fn n_intervals(&self) -> usize {
        self.n
    }

    pub fn t_f(&self) -> f64 {
        self.t_f
    }

    /// Nominal step `t_f / N`.
    pub fn h(&self) -> f64 {
        self.t_f / self.n as f64
    }

    /// Knot time `t_k`; the last knot is exactly `t_f`.
    pub fn knot(&self, k: usize) -> f64 {
        if k == self.n {
            self.t_f
        } else {
            self.t_f * k as f64 / self.n as f64
        }
    }

    pub fn knots(&self) -> Vec<f64> {
        (0..=self.n).map(|k| self.knot(k)).collect()
    }

    /// Width of interval `k`.
    pub fn width(&self, k: usize) -> f64 {
        self.knot(k + 1) - self.knot(k)
    }

    /// Midpoint time `t_k + h/2`.
    pub fn mid(&self, k: usize) -> f64 {
        self.knot(k) + 0.5 * self.width(k)
    }
}

/// Position of every variable group in the flat decision vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    n_x: usize,
    n_u: usize,
    n: usize,
    mid_states: bool,
    mid_controls: bool,
}

impl Layout {
    pub fn new(scheme: SchemeId, n_x: usize, n_u: usize, n_intervals: usize) -> Self {
        let hs = scheme.family == Family::HermiteSimpson;
        Layout {
            n_x,
            n_u,
            n: n_intervals,
            mid_states: hs && scheme.hs_form == HsForm::Separated,
            mid_controls: hs,
        }
    }

    fn mid_width(&self) -> usize {
        (if self.mid_states { self.n_x } else { 0 }) + (if self.mid_controls { self.n_u } else { 0 })
    }

    fn stride(&self) -> usize {
        self.n_x + self.n_u + self.mid_width()
    }

    pub fn n_vars(&self) -> usize {
        (self.n + 1) * (self.n_x + self.n_u) + self.n * self.mid_width()
    }

    pub fn knot_state(&self, k: usize) -> Range<usize> {
        let s = k * self.stride();
        s..s + self.n_x
    }

    pub fn knot_control(&self, k: usize) -> Range<usize> {
        let s = k * self.stride() + self.n_x;
        s..s + self.n_u
    }

    /// Midpoint state variables (separated Hermite-Simpson only).
    pub fn mid_state(&self, k: usize) -> Option<Range<usize>> {
        self.mid_states.then(|| {
            let s = k * self.stride() + self.n_x + self.n_u;
            s..s + self.n_x
        })
    }

    /// Midpoint control variables (Hermite-Simpson only).
    pub fn mid_control(&self, k: usize) -> Option<Range<usize>> {
        self.mid_controls.then(|| {
            let s = k * self.stride() + self.n_x + self.n_u + if self.mid_states { self.n_x } else { 0 };
            s..s + self.n_u
        })
    }

    /// All variables of interval `k`, from `x_k` through `u_{k+1}`.
    pub fn interval(&self, k: usize) -> Range<usize> {
        k * self.stride()..(k + 1) * self.stride() + self.n_x + self.n_u
    }
}

/// Problem-size bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NlpSizes {
    pub n_vars: usize,
    pub n_collocation: usize,
    pub n_boundary: usize,
    /// Collocation plus boundary equalities.
    pub n_eq: usize,
    pub n_ineq: usize,
    pub n_dof: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TranscribeOptions {
    /// Also enforce path constraints at Hermite-Simpson midpoints.
    pub path_at_midpoints: bool,
}

#[derive(Debug, Clone, Copy)]
enum Role {
    Interval(usize),
    Boundary,
    PathKnot,
    PathMid(usize),
    CostKnot(usize, f64),
    CostMid(usize, f64),
    Terminal,
}

/// A transcribed problem: a [`Problem`] plus layout and reconstruction helpers.
#[derive(Debug, Clone)]
pub struct Nlp {
    ocp: OcpDefinition,
    scheme: SchemeId,
    mesh: Mesh,
    layout: Layout,
    blocks: Vec<BlockSpec>,
    roles: Vec<Role>,
    bounds: Vec<Bound>,
    sizes: NlpSizes,
}

/// Transcribes with default options. A first-order scheme applied to a
/// higher-order problem lifts the problem first.
pub fn transcribe(ocp: &OcpDefinition, scheme: SchemeId, mesh: Mesh) -> Result<Nlp> {
    transcribe_with(ocp, scheme, mesh, TranscribeOptions::default())
}

pub fn transcribe_with(
    ocp: &OcpDefinition,
    scheme: SchemeId,
    mesh: Mesh,
    opts: TranscribeOptions,
) -> Result<Nlp> {
    scheme.validate()?;
    let ocp = if scheme.order == ocp.order() {
        ocp.clone()
    } else if scheme.order == 1 {
        lift_to_first_order(ocp)
    } else {
        return Err(Error::OrderMismatch {
            scheme: scheme.order,
            problem: ocp.order(),
        });
    };
    if ocp.order() > MAX_ORDER {
        return Err(Error::InvalidInput(format!("order {} is not supported", ocp.order())));
    }
    if (mesh.t_f() - ocp.t_f()).abs() > 1e-12 * ocp.t_f() {
        return Err(Error::InvalidInput(format!(
            "mesh horizon {} differs from problem horizon {}",
            mesh.t_f(),
            ocp.t_f()
        )));
    }
    let (n_x, n_u, n) = (ocp.n_x(), ocp.n_u(), mesh.n_intervals());
    let layout = Layout::new(scheme, n_x, n_u, n);
    let hs = scheme.family == Family::HermiteSimpson;
    let separated = layout.mid_states;

    let mut blocks = Vec::new();
    let mut roles = Vec::new();
    let mut push = |kind, vars: Vec<usize>, n_out, role| {
        blocks.push(BlockSpec { kind, vars, n_out });
        roles.push(role);
    };

    let per_interval = if separated { 2 * n_x } else { n_x };
    for k in 0..n {
        push(BlockKind::Equality, layout.interval(k).collect(), per_interval, Role::Interval(k));
    }
    if ocp.n_boundary() > 0 {
        let vars = layout.knot_state(0).chain(layout.knot_state(n)).collect();
        push(BlockKind::Equality, vars, ocp.n_boundary(), Role::Boundary);
    }
    let node = |k: usize| layout.knot_state(k).start..layout.knot_control(k).end;
    let mut n_ineq = 0;
    if ocp.n_path() > 0 {
        for k in 0..=n {
            push(BlockKind::Inequality, node(k).collect(), ocp.n_path(), Role::PathKnot);
            n_ineq += ocp.n_path();
        }
        if hs && opts.path_at_midpoints {
            for k in 0..n {
                push(BlockKind::Inequality, mid_vars(&layout, k), ocp.n_path(), Role::PathMid(k));
                n_ineq += ocp.n_path();
            }
        }
    }
    for k in 0..=n {
        let w = if hs {
            let h = |i: usize| mesh.width(i) / 6.0;
            (if k > 0 { h(k - 1) } else { 0.0 }) + (if k < n { h(k) } else { 0.0 })
        } else {
            let h = |i: usize| mesh.width(i) / 2.0;
            (if k > 0 { h(k - 1) } else { 0.0 }) + (if k < n { h(k) } else { 0.0 })
        };
        push(BlockKind::Cost, node(k).collect(), 1, Role::CostKnot(k, w));
    }
    if hs {
        for k in 0..n {
            let w = 4.0 * mesh.width(k) / 6.0;
            push(BlockKind::Cost, mid_vars(&layout, k), 1, Role::CostMid(k, w));
        }
    }
    push(BlockKind::Cost, layout.knot_state(n).collect(), 1, Role::Terminal);

    let mut bounds = vec![Bound::FREE; layout.n_vars()];
    let mut apply = |range: Range<usize>, b: Option<&[Bound]>| {
        if let Some(b) = b {
            for (i, bound) in range.zip(b) {
                bounds[i] = *bound;
            }
        }
    };
    for k in 0..=n {
        apply(layout.knot_state(k), ocp.state_bounds());
        apply(layout.knot_control(k), ocp.control_bounds());
    }
    for k in 0..n {
        if let Some(r) = layout.mid_state(k) {
            apply(r, ocp.state_bounds());
        }
        if let Some(r) = layout.mid_control(k) {
            apply(r, ocp.control_bounds());
        }
    }

    let n_collocation = n * per_interval;
    let n_eq = n_collocation + ocp.n_boundary();
    let n_vars = layout.n_vars();
    let sizes = NlpSizes {
        n_vars,
        n_collocation,
        n_boundary: ocp.n_boundary(),
        n_eq,
        n_ineq,
        n_dof: n_vars.saturating_sub(n_eq),
    };
    Ok(Nlp {
        ocp,
        scheme,
        mesh,
        layout,
        blocks,
        roles,
        bounds,
        sizes,
    })
}

/// Variables needed to evaluate the midpoint state and control of interval `k`.
fn mid_vars(layout: &Layout, k: usize) -> Vec<usize> {
    match layout.mid_state(k) {
        Some(s) => (s.start..layout.mid_control(k).map_or(s.end, |c| c.end)).collect(),
        None => layout.interval(k).collect(),
    }
}

/// A waypoint for the initial guess.
#[derive(Debug, Clone, PartialEq)]
pub struct Waypoint {
    pub t: f64,
    pub state: Vec<f64>,
}

impl Waypoint {
    pub fn new(t: f64, state: Vec<f64>) -> Self {
        Waypoint { t, state }
    }
}

impl Nlp {
    pub fn ocp(&self) -> &OcpDefinition {
        &self.ocp
    }

    pub fn scheme(&self) -> SchemeId {
        self.scheme
    }

    pub fn mesh(&self) -> Mesh {
        self.mesh
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn sizes(&self) -> NlpSizes {
        self.sizes
    }

    /// Cost functional: quadrature of the running cost plus terminal cost.
    pub fn cost(&self, x: &[f64]) -> f64 {
        eval_cost(self, x)
    }

    /// Collocation residuals followed by boundary residuals.
    pub fn equalities(&self, x: &[f64]) -> Vec<f64> {
        eval_constraints(self, x, BlockKind::Equality)
    }

    /// Path constraint values, `<= 0` when satisfied.
    pub fn inequalities(&self, x: &[f64]) -> Vec<f64> {
        eval_constraints(self, x, BlockKind::Inequality)
    }

    pub fn knot_state<'a>(&self, x: &'a [f64], k: usize) -> &'a [f64] {
        &x[self.layout.knot_state(k)]
    }

    pub fn knot_control<'a>(&self, x: &'a [f64], k: usize) -> &'a [f64] {
        &x[self.layout.knot_control(k)]
    }

    /// Midpoint state: stored in separated form, reconstructed in compressed
    /// form. `None` for the trapezoidal family.
    pub fn mid_state(&self, x: &[f64], k: usize) -> Option<Vec<f64>> {
        if self.scheme.family != Family::HermiteSimpson {
            return None;
        }
        Some(match self.layout.mid_state(k) {
            Some(r) => x[r].to_vec(),
            None => {
                let local: Vec<f64> = x[self.layout.interval(k)].to_vec();
                let [xk, uk, _, xk1, uk1] = self.split_interval(&local);
                let mut g_k = vec![0.0; self.ocp.n_q()];
                let mut g_k1 = vec![0.0; self.ocp.n_q()];
                self.ocp.dynamics_into(xk, uk, self.mesh.knot(k), &mut g_k);
                self.ocp.dynamics_into(xk1, uk1, self.mesh.knot(k + 1), &mut g_k1);
                let mut xc = vec![0.0; self.ocp.n_x()];
                self.midpoint_state(xk, xk1, &g_k, &g_k1, self.mesh.width(k), &mut xc);
                xc
            }
        })
    }

    pub fn mid_control<'a>(&self, x: &'a [f64], k: usize) -> Option<&'a [f64]> {
        self.layout.mid_control(k).map(|r| &x[r])
    }

    /// Splits interval-local variables into `(x_k, u_k, mid, x_{k+1}, u_{k+1})`.
    fn split_interval<'a>(
        &self,
        local: &'a [f64],
    ) -> [&'a [f64]; 5] {
        let (n_x, n_u) = (self.ocp.n_x(), self.ocp.n_u());
        let (xk, rest) = local.split_at(n_x);
        let (uk, rest) = rest.split_at(n_u);
        let (mid, rest) = rest.split_at(self.layout.mid_width());
        let (xk1, uk1) = rest.split_at(n_x);
        [xk, uk, mid, xk1, uk1]
    }

    fn midpoint_state(&self, xk: &[f64], xk1: &[f64], g_k: &[f64], g_k1: &[f64], h: f64, out: &mut [f64]) {
        let (n_q, m) = (self.ocp.n_q(), self.ocp.order());
        let mut yk = [0.0; MAX_ORDER];
        let mut yc = [0.0; MAX_ORDER];
        for i in 0..n_q {
            for j in 0..m {
                yk[j] = xk[j * n_q + i];
            }
            let g_c = eliminated_midpoint_g(yk[m - 1], xk1[(m - 1) * n_q + i], g_k[i], g_k1[i], h);
            hs_mid_into(&yk[..m], g_k[i], g_c, g_k1[i], h, &mut yc[..m]);
            for j in 0..m {
                out[j * n_q + i] = yc[j];
            }
        }
    }

    fn eval_interval(&self, k: usize, local: &[f64], out: &mut [f64]) {
        let (n_q, m, n_x) = (self.ocp.n_q(), self.ocp.order(), self.ocp.n_x());
        let h = self.mesh.width(k);
        let [xk, uk, mid, xk1, uk1] = self.split_interval(local);
        let mut g_k = vec![0.0; n_q];
        let mut g_k1 = vec![0.0; n_q];
        self.ocp.dynamics_into(xk, uk, self.mesh.knot(k), &mut g_k);
        self.ocp.dynamics_into(xk1, uk1, self.mesh.knot(k + 1), &mut g_k1);
        let mut yk = [0.0; MAX_ORDER];
        let mut pred = [0.0; MAX_ORDER];

        if self.scheme.family == Family::Trapezoidal {
            for i in 0..n_q {
                for j in 0..m {
                    yk[j] = xk[j * n_q + i];
                }
                tz_step_into(&yk[..m], g_k[i], g_k1[i], h, &mut pred[..m]);
                for j in 0..m {
                    out[j * n_q + i] = xk1[j * n_q + i] - pred[j];
                }
            }
            return;
        }

        let mut xc_buf = vec![0.0; n_x];
        let (xc, uc): (&[f64], &[f64]) = if self.layout.mid_states {
            let (xc, uc) = mid.split_at(n_x);
            // Midpoint residuals with g_c eliminated.
            self.midpoint_state(xk, xk1, &g_k, &g_k1, h, &mut xc_buf);
            for r in 0..n_x {
                out[n_x + r] = xc[r] - xc_buf[r];
            }
            (xc, uc)
        } else {
            self.midpoint_state(xk, xk1, &g_k, &g_k1, h, &mut xc_buf);
            (&xc_buf, mid)
        };
        let mut g_c = vec![0.0; n_q];
        self.ocp.dynamics_into(xc, uc, self.mesh.mid(k), &mut g_c);
        for i in 0..n_q {
            for j in 0..m {
                yk[j] = xk[j * n_q + i];
            }
            hs_end_into(&yk[..m], g_k[i], g_c[i], g_k1[i], h, &mut pred[..m]);
            for j in 0..m {
                out[j * n_q + i] = xk1[j * n_q + i] - pred[j];
            }
        }
    }

    /// Midpoint `(x_c, u_c)` from the variables of a midpoint block.
    fn mid_from_block(&self, k: usize, local: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n_x = self.ocp.n_x();
        if self.layout.mid_states {
            (local[..n_x].to_vec(), local[n_x..].to_vec())
        } else {
            let [xk, uk, uc, xk1, uk1] = self.split_interval(local);
            let mut g_k = vec![0.0; self.ocp.n_q()];
            let mut g_k1 = vec![0.0; self.ocp.n_q()];
            self.ocp.dynamics_into(xk, uk, self.mesh.knot(k), &mut g_k);
            self.ocp.dynamics_into(xk1, uk1, self.mesh.knot(k + 1), &mut g_k1);
            let mut xc = vec![0.0; n_x];
            self.midpoint_state(xk, xk1, &g_k, &g_k1, self.mesh.width(k), &mut xc);
            (xc, uc.to_vec())
        }
    }

    /// Decision vector with states interpolated linearly through `waypoints`
    /// (held constant outside their time span) and zero controls.
    pub fn assemble_initial_guess(&self, waypoints: &[Waypoint]) -> Result<Vec<f64>> {
        if waypoints.is_empty() {
            return Err(Error::InvalidInput("initial guess needs at least one waypoint".into()));
        }
        let n_x = self.ocp.n_x();
        for w in waypoints {
            check_len("waypoint state", n_x, w.state.len())?;
            if !w.t.is_finite() {
                return Err(Error::InvalidInput("waypoint times must be finite".into()));
            }
        }
        if waypoints.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(Error::InvalidInput("waypoint times must be strictly increasing".into()));
        }
        let interp = |t: f64, out: &mut [f64]| {
            let i = waypoints.partition_point(|w| w.t <= t);
            if i == 0 {
                out.copy_from_slice(&waypoints[0].state);
            } else if i == waypoints.len() {
                out.copy_from_slice(&waypoints[i - 1].state);
            } else {
                let (a, b) = (&waypoints[i - 1], &waypoints[i]);
                let s = (t - a.t) / (b.t - a.t);
                for (o, (xa, xb)) in out.iter_mut().zip(a.state.iter().zip(&b.state)) {
                    *o = xa + s * (xb - xa);
                }
            }
        };
        let mut x = vec![0.0; self.layout.n_vars()];
        let n = self.mesh.n_intervals();
        for k in 0..=n {
            interp(self.mesh.knot(k), &mut x[self.layout.knot_state(k)]);
        }
        for k in 0..n {
            if let Some(r) = self.layout.mid_state(k) {
                interp(self.mesh.mid(k), &mut x[r]);
            }
        }
        Ok(x)
    }

    /// Continuous state and control reconstruction from a decision vector.
    pub fn trajectory(&self, x: &[f64]) -> Result<PolyTrajectory> {
        check_len("decision vector", self.layout.n_vars(), x.len())?;
        let n = self.mesh.n_intervals();
        let n_q = self.ocp.n_q();
        let mut samples = InterpolantSamples {
            knots: self.mesh.knots(),
            ..Default::default()
        };
        for k in 0..=n {
            let (xs, us) = (self.knot_state(x, k), self.knot_control(x, k));
            let mut g = vec![0.0; n_q];
            self.ocp.dynamics_into(xs, us, self.mesh.knot(k), &mut g);
            samples.knot_states.push(xs.to_vec());
            samples.knot_g.push(g);
            samples.knot_controls.push(us.to_vec());
        }
        if self.scheme.family == Family::HermiteSimpson {
            for k in 0..n {
                let xc = self.mid_state(x, k).expect("Hermite-Simpson midpoint");
                let uc = self.mid_control(x, k).expect("Hermite-Simpson midpoint");
                let mut g = vec![0.0; n_q];
                self.ocp.dynamics_into(&xc, uc, self.mesh.mid(k), &mut g);
                samples.mid_g.push(g);
                samples.mid_controls.push(uc.to_vec());
            }
        }
        build_interpolant(self.scheme, &samples)
    }
}

/// Quadrature of the running cost plus terminal cost at decision vector `x`.
pub fn quadrature_cost(ocp: &OcpDefinition, scheme: SchemeId, mesh: Mesh, x: &[f64]) -> Result<f64> {
    let nlp = transcribe(ocp, scheme, mesh)?;
    check_len("decision vector", nlp.sizes.n_vars, x.len())?;
    Ok(nlp.cost(x))
}

impl Problem for Nlp {
    fn n_vars(&self) -> usize {
        self.layout.n_vars()
    }

    fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    fn eval_block(&self, block: usize, local: &[f64], out: &mut [f64]) {
        let n_x = self.ocp.n_x();
        let n_x_u = n_x + self.ocp.n_u();
        match self.roles[block] {
            Role::Interval(k) => self.eval_interval(k, local, out),
            Role::Boundary => {
                self.ocp
                    .boundary_into(&local[..n_x], &local[n_x..], self.mesh.t_f(), out)
            }
            Role::PathKnot => self.ocp.path_into(&local[..n_x], &local[n_x..n_x_u], out),
            Role::PathMid(k) => {
                let (xc, uc) = self.mid_from_block(k, local);
                self.ocp.path_into(&xc, &uc, out);
            }
            Role::CostKnot(k, w) => {
                out[0] = w * self.ocp.running_cost(&local[..n_x], &local[n_x..n_x_u], self.mesh.knot(k));
            }
            Role::CostMid(k, w) => {
                let (xc, uc) = self.mid_from_block(k, local);
                out[0] = w * self.ocp.running_cost(&xc, &uc, self.mesh.mid(k));
            }
            Role::Terminal => out[0] = self.ocp.terminal_cost(local, self.mesh.t_f()),
        }
    }

    fn bounds(&self) -> Vec<Bound> {
        self.bounds.clone()
    }
}
