//! Built-in constrained NLP solver.
//!
//! Augmented-Lagrangian outer loop over equality and inequality multipliers;
//! variable bounds are kept feasible by projection. Each inner subproblem is
//! minimized with a projected Newton-type iteration: the model Hessian
//! combines the exact Gauss-Newton penalty term `rho J^T J` with
//! finite-difference curvature of the multiplier-weighted blocks, assembled
//! in envelope storage and regularized until positive definite, followed by
//! an Armijo backtracking search along the projection arc.

mod envelope;
pub mod fd;
pub mod problem;

use std::cell::RefCell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};
use envelope::EnvelopeMatrix;
pub use fd::{finite_diff_gradient, finite_diff_jacobian, FdOptions};
pub use problem::{eval_constraints, eval_cost, BlockKind, BlockSpec, DenseProblem, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Tolerance on the scaled KKT residual; the constraint violation must
    /// reach `FEASIBILITY_RATIO * kkt_tol`.
    pub kkt_tol: f64,
    pub max_outer_iters: usize,
    /// Inner iterations allowed per outer iteration.
    pub max_inner_iters: usize,
    pub penalty_init: f64,
    pub penalty_growth: f64,
    /// Relative finite-difference step for first derivatives.
    pub fd_step: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            kkt_tol: 1e-7,
            max_outer_iters: 60,
            max_inner_iters: 400,
            penalty_init: 10.0,
            penalty_growth: 10.0,
            fd_step: f64::EPSILON.cbrt(),
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.kkt_tol, self.penalty_init, self.fd_step]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite());
        if !positive || self.max_outer_iters == 0 || self.max_inner_iters == 0 {
            return Err(crate::Error::InvalidInput(
                "solver options must be positive".into(),
            ));
        }
        if !(self.penalty_growth > 1.0) {
            return Err(crate::Error::InvalidInput(
                "penalty_growth must exceed 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    MaxIters,
    Diverged,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "Converged",
            SolveStatus::MaxIters => "MaxIters",
            SolveStatus::Diverged => "Diverged",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub x: Vec<f64>,
    pub cost: f64,
    /// Scaled stationarity/complementarity residual.
    pub kkt_residual: f64,
    /// Infinity norm of constraint and bound violations.
    pub constraint_violation: f64,
    /// Inner iterations over all outer iterations.
    pub iterations: usize,
    pub outer_iterations: usize,
    pub status: SolveStatus,
    pub lambda_eq: Vec<f64>,
    pub mu_ineq: Vec<f64>,
    pub penalty: f64,
    pub message: String,
}

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-12;
const PENALTY_MAX: f64 = 1e12;
const PROGRESS_RATIO: f64 = 0.25;
/// Relative inner stationarity tolerance of the first outer iteration.
const INNER_TOL_INIT: f64 = 1e-2;
/// Width of the band near a bound inside which a variable may be held fixed.
const ACTIVE_BAND: f64 = 1e-3;
/// Constraint violation target relative to `kkt_tol`. Collocation defects
/// reach the dynamic error amplified by the dynamics Jacobian.
const FEASIBILITY_RATIO: f64 = 0.1;

struct BlockInfo {
    /// Local indices each output row depends on.
    row_deps: Vec<Vec<usize>>,
    /// Local index pairs `(p, q)`, `p >= q`, sharing a row.
    pairs: Vec<(usize, usize)>,
    /// Offset of the block's rows in the values/multiplier vector of its kind.
    offset: usize,
    /// Offset of the block's Jacobian in the flat Jacobian buffer.
    jac_offset: usize,
}

struct Structure {
    blocks: Vec<BlockInfo>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    n_eq: usize,
    n_ineq: usize,
    jac_len: usize,
    envelope_first: Vec<usize>,
}

fn analyze<P: Problem + ?Sized>(p: &P, x0: &[f64]) -> Structure {
    let mut rng = ChaCha8Rng::seed_from_u64(0x636f_6c6c_6f63);
    let mut blocks = Vec::with_capacity(p.blocks().len());
    let mut n_eq = 0;
    let mut n_ineq = 0;
    let mut jac_len = 0;
    let n = p.n_vars();
    let mut first: Vec<usize> = (0..n).collect();
    let mut local = Vec::new();
    for (b, spec) in p.blocks().iter().enumerate() {
        let nv = spec.vars.len();
        problem::gather(x0, &spec.vars, &mut local);
        let mut depends = vec![vec![false; nv]; spec.n_out];
        let mut base = vec![0.0; spec.n_out];
        let mut moved = vec![0.0; spec.n_out];
        for probe in 0..3 {
            let mut y = local.clone();
            if probe > 0 {
                for v in y.iter_mut() {
                    *v += 1e-2 * v.abs().max(1.0) * rng.gen_range(-1.0..1.0);
                }
            }
            p.eval_block(b, &y, &mut base);
            for j in 0..nv {
                let old = y[j];
                y[j] = old + 1e-3 * old.abs().max(1.0);
                p.eval_block(b, &y, &mut moved);
                y[j] = old;
                for r in 0..spec.n_out {
                    if base[r].to_bits() != moved[r].to_bits() {
                        depends[r][j] = true;
                    }
                }
            }
        }
        let row_deps: Vec<Vec<usize>> = depends
            .iter()
            .map(|row| (0..nv).filter(|&j| row[j]).collect())
            .collect();
        let mut pair_set = vec![vec![false; nv]; nv];
        for deps in &row_deps {
            for &a in deps {
                for &c in deps {
                    let (pp, qq) = if spec.vars[a] >= spec.vars[c] { (a, c) } else { (c, a) };
                    pair_set[pp][qq] = true;
                }
            }
        }
        let mut pairs = Vec::new();
        for a in 0..nv {
            for c in 0..nv {
                if pair_set[a][c] {
                    pairs.push((a, c));
                    let (gi, gj) = (spec.vars[a], spec.vars[c]);
                    first[gi] = first[gi].min(gj);
                }
            }
        }
        let offset = match spec.kind {
            BlockKind::Cost => 0,
            BlockKind::Equality => {
                n_eq += spec.n_out;
                n_eq - spec.n_out
            }
            BlockKind::Inequality => {
                n_ineq += spec.n_out;
                n_ineq - spec.n_out
            }
        };
        blocks.push(BlockInfo {
            row_deps,
            pairs,
            offset,
            jac_offset: jac_len,
        });
        jac_len += spec.n_out * nv;
    }
    let bounds = p.bounds();
    Structure {
        blocks,
        lower: bounds.iter().map(|b| b.lower).collect(),
        upper: bounds.iter().map(|b| b.upper).collect(),
        n_eq,
        n_ineq,
        jac_len,
        envelope_first: first,
    }
}

/// Multipliers and penalty of the augmented Lagrangian.
struct Multipliers {
    eq: Vec<f64>,
    ineq: Vec<f64>,
    rho: f64,
}

/// Block values at a point.
struct Values {
    cost: f64,
    eq: Vec<f64>,
    ineq: Vec<f64>,
}

impl Values {
    fn violation(&self) -> f64 {
        let eq = self.eq.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let ineq = self.ineq.iter().fold(0.0f64, |m, c| m.max(*c));
        eq.max(ineq)
    }

    fn is_finite(&self) -> bool {
        self.cost.is_finite() && self.eq.iter().chain(&self.ineq).all(|v| v.is_finite())
    }

    fn augmented(&self, m: &Multipliers) -> f64 {
        let rho = m.rho;
        let mut total = self.cost;
        for (c, l) in self.eq.iter().zip(&m.eq) {
            total += l * c + 0.5 * rho * c * c;
        }
        for (c, mu) in self.ineq.iter().zip(&m.ineq) {
            let s = (mu + rho * c).max(0.0);
            total += (s * s - mu * mu) / (2.0 * rho);
        }
        total
    }
}

struct Engine<'a, P: Problem + ?Sized> {
    p: &'a P,
    st: Structure,
    opts: SolveOptions,
    local: RefCell<Vec<f64>>,
    scratch: RefCell<Vec<f64>>,
}

impl<'a, P: Problem + ?Sized> Engine<'a, P> {
    fn values(&self, x: &[f64]) -> Values {
        let mut v = Values {
            cost: 0.0,
            eq: vec![0.0; self.st.n_eq],
            ineq: vec![0.0; self.st.n_ineq],
        };
        let mut local = self.local.borrow_mut();
        let mut one = [0.0];
        for (b, (spec, info)) in self.p.blocks().iter().zip(&self.st.blocks).enumerate() {
            problem::gather(x, &spec.vars, &mut local);
            match spec.kind {
                BlockKind::Cost => {
                    self.p.eval_block(b, &local, &mut one);
                    v.cost += one[0];
                }
                BlockKind::Equality => self.p.eval_block(
                    b,
                    &local,
                    &mut v.eq[info.offset..info.offset + spec.n_out],
                ),
                BlockKind::Inequality => self.p.eval_block(
                    b,
                    &local,
                    &mut v.ineq[info.offset..info.offset + spec.n_out],
                ),
            }
        }
        v
    }

    fn project(&self, x: &mut [f64]) {
        for ((v, lo), hi) in x.iter_mut().zip(&self.st.lower).zip(&self.st.upper) {
            *v = v.max(*lo).min(*hi);
        }
    }

    /// `x - P(x - g)`, whose norm measures stationarity on the box.
    fn projected_gradient(&self, x: &[f64], g: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|i| x[i] - (x[i] - g[i]).max(self.st.lower[i]).min(self.st.upper[i]))
            .collect()
    }

    /// Local Jacobians of every block, row-major, into `jac`.
    fn jacobians(&self, x: &[f64], jac: &mut [f64]) -> Result<()> {
        let mut local = Vec::new();
        for (b, (spec, info)) in self.p.blocks().iter().zip(&self.st.blocks).enumerate() {
            problem::gather(x, &spec.vars, &mut local);
            let out = &mut jac[info.jac_offset..info.jac_offset + spec.n_out * spec.vars.len()];
            if self.p.block_jacobian(b, &local, out) {
                continue;
            }
            let f = |y: &[f64], o: &mut [f64]| self.p.eval_block(b, y, o);
            fd::jacobian_into(&f, spec.n_out, &mut local, self.opts.fd_step, out).map_err(
                |e| match e {
                    crate::Error::NonFinite { index } => crate::Error::NonFinite {
                        index: spec.vars[index],
                    },
                    other => other,
                },
            )?;
        }
        Ok(())
    }

    /// Row weights of the multiplier-weighted curvature and of `rho J^T J`.
    fn row_weights(&self, kind: BlockKind, row: usize, v: &Values, m: &Multipliers) -> (f64, f64) {
        match kind {
            BlockKind::Cost => (1.0, 0.0),
            BlockKind::Equality => (m.eq[row] + m.rho * v.eq[row], m.rho),
            BlockKind::Inequality => {
                let s = m.ineq[row] + m.rho * v.ineq[row];
                if s > 0.0 {
                    (s, m.rho)
                } else {
                    (0.0, 0.0)
                }
            }
        }
    }

    /// Gradient of the augmented Lagrangian and of the cost alone.
    fn gradients(&self, v: &Values, jac: &[f64], m: &Multipliers) -> (Vec<f64>, Vec<f64>) {
        let n = self.p.n_vars();
        let mut g = vec![0.0; n];
        let mut gf = vec![0.0; n];
        for (spec, info) in self.p.blocks().iter().zip(&self.st.blocks) {
            let nv = spec.vars.len();
            for r in 0..spec.n_out {
                let (w, _) = self.row_weights(spec.kind, info.offset + r, v, m);
                if w == 0.0 {
                    continue;
                }
                let row = &jac[info.jac_offset + r * nv..info.jac_offset + (r + 1) * nv];
                for (p, &var) in spec.vars.iter().enumerate() {
                    g[var] += w * row[p];
                    if spec.kind == BlockKind::Cost {
                        gf[var] += row[p];
                    }
                }
            }
        }
        (g, gf)
    }

    fn assemble(
        &self,
        x: &[f64],
        v: &Values,
        jac: &[f64],
        m: &Multipliers,
        hess: &mut EnvelopeMatrix,
    ) {
        hess.clear();
        let hstep = f64::EPSILON.powf(0.25);
        let mut local = Vec::new();
        let mut pair_vals = Vec::new();
        for (b, (spec, info)) in self.p.blocks().iter().zip(&self.st.blocks).enumerate() {
            let nv = spec.vars.len();
            let weights: Vec<(f64, f64)> = (0..spec.n_out)
                .map(|r| self.row_weights(spec.kind, info.offset + r, v, m))
                .collect();
            // Gauss-Newton penalty term.
            for (r, deps) in info.row_deps.iter().enumerate() {
                let gn = weights[r].1;
                if gn == 0.0 {
                    continue;
                }
                let row = &jac[info.jac_offset + r * nv..info.jac_offset + (r + 1) * nv];
                for &a in deps {
                    for &c in deps {
                        let (ga, gc) = (spec.vars[a], spec.vars[c]);
                        if ga >= gc {
                            hess.add(ga, gc, gn * row[a] * row[c]);
                        }
                    }
                }
            }
            // Weighted curvature of the block outputs.
            if weights.iter().all(|w| w.0 == 0.0) || info.pairs.is_empty() {
                continue;
            }
            problem::gather(x, &spec.vars, &mut local);
            let phi = |y: &[f64]| -> f64 {
                let mut out = self.scratch.borrow_mut();
                out.resize(spec.n_out, 0.0);
                self.p.eval_block(b, y, &mut out);
                out.iter().zip(&weights).map(|(o, w)| o * w.0).sum()
            };
            pair_vals.resize(info.pairs.len(), 0.0);
            fd::hessian_pairs(&phi, &mut local, hstep, &info.pairs, &mut pair_vals);
            for (&(a, c), &h) in info.pairs.iter().zip(&pair_vals) {
                if h.is_finite() {
                    hess.add(spec.vars[a], spec.vars[c], h);
                }
            }
        }
    }

    fn update_multipliers(&self, v: &Values, m: &mut Multipliers) {
        let rho = m.rho;
        for (l, c) in m.eq.iter_mut().zip(&v.eq) {
            *l += rho * c;
        }
        for (mu, c) in m.ineq.iter_mut().zip(&v.ineq) {
            *mu = (*mu + rho * c).max(0.0);
        }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Complementarity of the first-order multiplier estimates `max(0, mu + rho c)`.
fn complementarity(v: &Values, m: &Multipliers) -> f64 {
    v.ineq
        .iter()
        .zip(&m.ineq)
        .map(|(c, mu)| {
            let est = (mu + m.rho * c).max(0.0);
            (-c).min(est).abs()
        })
        .fold(0.0, f64::max)
}

/// Minimizes `problem` starting from `guess`.
///
/// Deterministic for fixed inputs. The guess is first projected onto the
/// variable bounds. The returned solution carries the last iterate and
/// diagnostics even when the solve does not converge.
pub fn solve<P: Problem + ?Sized>(problem: &P, guess: &[f64], opts: &SolveOptions) -> Result<Solution> {
    opts.validate()?;
    check_len("initial guess", problem.n_vars(), guess.len())?;
    let n = problem.n_vars();
    let engine = Engine {
        p: problem,
        st: analyze(problem, guess),
        opts: *opts,
        local: RefCell::new(Vec::new()),
        scratch: RefCell::new(Vec::new()),
    };
    let mut m = Multipliers {
        eq: vec![0.0; engine.st.n_eq],
        ineq: vec![0.0; engine.st.n_ineq],
        rho: opts.penalty_init,
    };
    let mut x = guess.to_vec();
    engine.project(&mut x);
    let mut vals = engine.values(&x);
    let mut jac = vec![0.0; engine.st.jac_len];

    let finish = |x: Vec<f64>,
                  vals: &Values,
                  m: &Multipliers,
                  kkt: f64,
                  iters: usize,
                  outer: usize,
                  status: SolveStatus,
                  message: String| Solution {
        cost: vals.cost,
        constraint_violation: vals.violation(),
        kkt_residual: kkt,
        iterations: iters,
        outer_iterations: outer,
        status,
        lambda_eq: m.eq.clone(),
        mu_ineq: m.ineq.clone(),
        penalty: m.rho,
        message,
        x,
    };

    if !vals.is_finite() || x.iter().any(|v| !v.is_finite()) {
        return Ok(finish(
            x,
            &vals,
            &m,
            f64::INFINITY,
            0,
            0,
            SolveStatus::Diverged,
            "non-finite cost or constraint values at the initial guess".into(),
        ));
    }

    let mut hess = EnvelopeMatrix::new(engine.st.envelope_first.clone());
    let mut factor = hess.clone();
    let mut shift = 0.0f64;
    let mut total_inner = 0;
    let mut prev_violation = vals.violation();
    let mut kkt = f64::INFINITY;
    let mut omega = INNER_TOL_INIT;
    let mut active = vec![false; n];
    let mut trial = vec![0.0; n];

    for outer in 0..opts.max_outer_iters {
        let mut inner = 0;
        loop {
            if let Err(e) = engine.jacobians(&x, &mut jac) {
                return Ok(finish(
                    x,
                    &vals,
                    &m,
                    f64::INFINITY,
                    total_inner,
                    outer + 1,
                    SolveStatus::Diverged,
                    e.to_string(),
                ));
            }
            let (grad, gf) = engine.gradients(&vals, &jac, &m);
            let pg = engine.projected_gradient(&x, &grad);
            let pg_norm = inf_norm(&pg);
            let scale = inf_norm(&gf).max(1.0);
            kkt = (pg_norm / scale).max(complementarity(&vals, &m));
            let inner_tol = (0.5 * opts.kkt_tol).max(omega) * scale;
            if pg_norm <= inner_tol || inner >= opts.max_inner_iters {
                break;
            }
            inner += 1;
            total_inner += 1;

            // Variables near a bound with the gradient pushing outward are
            // held on the bound; Newton acts on the rest.
            let band = ACTIVE_BAND.min(pg_norm);
            for i in 0..n {
                let lo = engine.st.lower[i];
                let hi = engine.st.upper[i];
                active[i] =
                    (x[i] <= lo + band && grad[i] > 0.0) || (x[i] >= hi - band && grad[i] < 0.0);
            }
            engine.assemble(&x, &vals, &jac, &m, &mut hess);
            hess.pin(&active);
            let phi0 = vals.augmented(&m);
            let roundoff = 64.0 * f64::EPSILON * (1.0 + phi0.abs());
            let mut accepted = false;
            let mut tries = 0;
            shift = (shift / 4.0).max(0.0);
            if shift < 1e-12 {
                shift = 0.0;
            }
            while tries < 6 && !accepted {
                tries += 1;
                let base = 1e-8 * hess.max_abs_diag().max(1.0);
                while !hess.cholesky_into(shift, &mut factor) {
                    shift = if shift == 0.0 { base } else { shift * 10.0 };
                }
                let mut d: Vec<f64> = (0..n).map(|i| if active[i] { 0.0 } else { -grad[i] }).collect();
                factor.cholesky_solve(&mut d);
                let mut slope: f64 = (0..n).filter(|&i| !active[i]).map(|i| d[i] * grad[i]).sum();
                if !(slope < 0.0) {
                    slope = 0.0;
                    for i in 0..n {
                        d[i] = if active[i] { 0.0 } else { -grad[i] };
                        slope -= d[i] * d[i];
                    }
                }
                for i in 0..n {
                    if active[i] {
                        d[i] = -grad[i];
                    }
                }
                let mut alpha = 1.0;
                while alpha >= MIN_STEP {
                    for i in 0..n {
                        trial[i] = x[i] + alpha * d[i];
                    }
                    engine.project(&mut trial);
                    let tv = engine.values(&trial);
                    if tv.is_finite() {
                        let pinned: f64 = (0..n)
                            .filter(|&i| active[i])
                            .map(|i| grad[i] * (x[i] - trial[i]))
                            .sum();
                        let phi = tv.augmented(&m);
                        if phi <= phi0 + ARMIJO * (alpha * slope - pinned) + roundoff {
                            x.copy_from_slice(&trial);
                            vals = tv;
                            accepted = true;
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                if !accepted {
                    shift = (shift * 100.0).max(1e-4 * hess.max_abs_diag().max(1.0));
                }
            }
            if !accepted {
                break;
            }
        }

        let violation = vals.violation();
        if violation <= FEASIBILITY_RATIO * opts.kkt_tol && kkt <= opts.kkt_tol {
            engine.update_multipliers(&vals, &mut m);
            return Ok(finish(
                x,
                &vals,
                &m,
                kkt,
                total_inner,
                outer + 1,
                SolveStatus::Converged,
                "converged".into(),
            ));
        }
        if engine.st.n_eq + engine.st.n_ineq == 0 && inner == 0 {
            break;
        }
        engine.update_multipliers(&vals, &mut m);
        if violation > PROGRESS_RATIO * prev_violation {
            m.rho = (m.rho * opts.penalty_growth).min(PENALTY_MAX);
        }
        prev_violation = violation;
        omega = (omega * 0.1).max(0.5 * opts.kkt_tol);
    }

    Ok(finish(
        x,
        &vals,
        &m,
        kkt,
        total_inner,
        opts.max_outer_iters,
        SolveStatus::MaxIters,
        "iteration limit reached".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Bound;

    #[test]
    fn unconstrained_interior_optimum_with_bound() {
        let p = DenseProblem::new(1, |x| (x[0] - 3.0).powi(2))
            .with_bounds(vec![Bound::new(0.0, f64::INFINITY)]);
        let s = solve(&p, &[0.5], &SolveOptions::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Converged);
        assert!((s.x[0] - 3.0).abs() < 1e-7);
        assert!(s.cost.abs() < 1e-12);
    }

    #[test]
    fn active_bound() {
        let p = DenseProblem::new(1, |x| (x[0] + 1.0).powi(2))
            .with_bounds(vec![Bound::new(0.0, f64::INFINITY)]);
        let s = solve(&p, &[2.0], &SolveOptions::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Converged);
        assert!(s.x[0].abs() < 1e-6, "{:?}", s);
    }

    #[test]
    fn projection_onto_line() {
        let p = DenseProblem::new(2, |x| x[0] * x[0] + x[1] * x[1])
            .with_equalities(1, |x, c| c[0] = x[0] + x[1] - 1.0);
        let s = solve(&p, &[0.0, 0.0], &SolveOptions::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Converged);
        assert!((s.x[0] - 0.5).abs() < 1e-6);
        assert!((s.x[1] - 0.5).abs() < 1e-6);
        assert!((s.cost - 0.5).abs() < 1e-6);
        assert!(s.outer_iterations <= 8, "{}", s.outer_iterations);
        assert!((s.lambda_eq[0] + 1.0).abs() < 1e-5);
    }

    #[test]
    fn inequality_constraint() {
        // min (x-2)^2 + (y-1)^2  s.t. x + y <= 1  ->  (1, 0)
        let p = DenseProblem::new(2, |x| (x[0] - 2.0).powi(2) + (x[1] - 1.0).powi(2))
            .with_inequalities(1, |x, c| c[0] = x[0] + x[1] - 1.0);
        let s = solve(&p, &[0.0, 0.0], &SolveOptions::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Converged);
        assert!((s.x[0] - 1.0).abs() < 1e-6);
        assert!(s.x[1].abs() < 1e-6);
        assert!((s.mu_ineq[0] - 2.0).abs() < 1e-5);
    }

    #[test]
    fn nonlinear_equality() {
        // min x + y on the unit circle -> (-1/sqrt2, -1/sqrt2)
        let p = DenseProblem::new(2, |x| x[0] + x[1])
            .with_equalities(1, |x, c| c[0] = x[0] * x[0] + x[1] * x[1] - 1.0);
        let s = solve(&p, &[0.5, -0.2], &SolveOptions::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Converged);
        let r = -std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.x[0] - r).abs() < 1e-6 && (s.x[1] - r).abs() < 1e-6, "{:?}", s.x);
    }

    #[test]
    fn rosenbrock_unconstrained() {
        let p = DenseProblem::new(2, |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2));
        let s = solve(&p, &[-1.2, 1.0], &SolveOptions::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Converged);
        assert!((s.x[0] - 1.0).abs() < 1e-5 && (s.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn non_finite_guess_diverges() {
        let p = DenseProblem::new(1, |x| x[0].ln());
        let s = solve(&p, &[-1.0], &SolveOptions::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Diverged);
    }

    #[test]
    fn wrong_guess_length_rejected() {
        let p = DenseProblem::new(2, |x| x[0]);
        assert!(solve(&p, &[1.0], &SolveOptions::default()).is_err());
    }

    #[test]
    fn options_validated() {
        let p = DenseProblem::new(1, |x| x[0] * x[0]);
        let bad = SolveOptions {
            penalty_growth: 1.0,
            ..SolveOptions::default()
        };
        assert!(solve(&p, &[1.0], &bad).is_err());
    }

    #[test]
    fn deterministic() {
        let p = DenseProblem::new(2, |x| x[0].powi(4) + x[0] * x[1] + (1.0 + x[1]).powi(2))
            .with_equalities(1, |x, c| c[0] = x[0] - x[1].sin());
        let a = solve(&p, &[0.3, 0.1], &SolveOptions::default()).unwrap();
        let b = solve(&p, &[0.3, 0.1], &SolveOptions::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            a.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
}
