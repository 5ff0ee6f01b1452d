//! Continuous optimal-control problems with explicit Mth-order dynamics.
//!
//! A problem stores its state as the level-major stack
//! `(q_1..q_nq, q'_1..q'_nq, ..., q^(M-1)_1..q^(M-1)_nq)`, so a flat state
//! vector has `M * n_q` entries. The dynamics callable returns `q^(M)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_len, Error, Result};

/// `g(x, u, t) -> q^(M)`, written into the output slice of length `n_q`.
pub type DynamicsFn = Arc<dyn Fn(&[f64], &[f64], f64, &mut [f64]) + Send + Sync>;
/// Running cost `L(x, u, t)`.
pub type RunningCostFn = Arc<dyn Fn(&[f64], &[f64], f64) -> f64 + Send + Sync>;
/// Terminal cost `K(x_f, t_f)`.
pub type TerminalCostFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
/// Path constraints `p(x, u) <= 0`.
pub type PathFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;
/// Boundary constraints `b(x_0, x_f, t_f) = 0`.
pub type BoundaryFn = Arc<dyn Fn(&[f64], &[f64], f64, &mut [f64]) + Send + Sync>;

/// Closed interval bound on a single coordinate. Infinite ends are allowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound {
    pub lower: f64,
    pub upper: f64,
}

impl Bound {
    pub const FREE: Bound = Bound {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };

    pub fn new(lower: f64, upper: f64) -> Self {
        Bound { lower, upper }
    }

    pub fn symmetric(limit: f64) -> Self {
        Bound::new(-limit, limit)
    }

    pub fn is_free(&self) -> bool {
        self.lower == f64::NEG_INFINITY && self.upper == f64::INFINITY
    }
}

/// A continuous optimal-control problem over a fixed horizon `[0, t_f]`.
#[derive(Clone)]
pub struct OcpDefinition {
    name: String,
    n_q: usize,
    n_u: usize,
    order: usize,
    t_f: f64,
    dynamics: DynamicsFn,
    running_cost: RunningCostFn,
    terminal_cost: TerminalCostFn,
    n_path: usize,
    path_constraints: PathFn,
    n_boundary: usize,
    boundary_constraints: BoundaryFn,
    state_bounds: Option<Vec<Bound>>,
    control_bounds: Option<Vec<Bound>>,
    units: Vec<String>,
    source_order: usize,
    source_n_q: usize,
}

impl fmt::Debug for OcpDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OcpDefinition")
            .field("name", &self.name)
            .field("n_q", &self.n_q)
            .field("n_u", &self.n_u)
            .field("order", &self.order)
            .field("t_f", &self.t_f)
            .field("n_path", &self.n_path)
            .field("n_boundary", &self.n_boundary)
            .field("source_order", &self.source_order)
            .finish_non_exhaustive()
    }
}

impl OcpDefinition {
    /// Creates a problem with zero costs and no constraints.
    pub fn new(
        name: impl Into<String>,
        n_q: usize,
        n_u: usize,
        order: usize,
        t_f: f64,
        dynamics: DynamicsFn,
    ) -> Result<Self> {
        if n_q == 0 {
            return Err(Error::InvalidInput("n_q must be at least 1".into()));
        }
        if order == 0 {
            return Err(Error::InvalidInput("dynamics order must be at least 1".into()));
        }
        if !(t_f > 0.0 && t_f.is_finite()) {
            return Err(Error::InvalidInput(format!("t_f must be positive, got {t_f}")));
        }
        Ok(OcpDefinition {
            name: name.into(),
            n_q,
            n_u,
            order,
            t_f,
            dynamics,
            running_cost: Arc::new(|_, _, _| 0.0),
            terminal_cost: Arc::new(|_, _| 0.0),
            n_path: 0,
            path_constraints: Arc::new(|_, _, _| {}),
            n_boundary: 0,
            boundary_constraints: Arc::new(|_, _, _, _| {}),
            state_bounds: None,
            control_bounds: None,
            units: vec![String::new(); n_q],
            source_order: order,
            source_n_q: n_q,
        })
    }

    pub fn with_running_cost(mut self, cost: RunningCostFn) -> Self {
        self.running_cost = cost;
        self
    }

    pub fn with_terminal_cost(mut self, cost: TerminalCostFn) -> Self {
        self.terminal_cost = cost;
        self
    }

    pub fn with_path_constraints(mut self, count: usize, p: PathFn) -> Self {
        self.n_path = count;
        self.path_constraints = p;
        self
    }

    pub fn with_boundary_constraints(mut self, count: usize, b: BoundaryFn) -> Self {
        self.n_boundary = count;
        self.boundary_constraints = b;
        self
    }

    pub fn with_state_bounds(mut self, bounds: Vec<Bound>) -> Result<Self> {
        check_len("state bounds", self.n_x(), bounds.len())?;
        self.state_bounds = Some(bounds);
        Ok(self)
    }

    pub fn with_control_bounds(mut self, bounds: Vec<Bound>) -> Result<Self> {
        check_len("control bounds", self.n_u, bounds.len())?;
        self.control_bounds = Some(bounds);
        Ok(self)
    }

    /// Physical unit of each configuration coordinate (of the source problem).
    pub fn with_units<S: Into<String>>(mut self, units: Vec<S>) -> Result<Self> {
        check_len("units", self.source_n_q, units.len())?;
        self.units = units.into_iter().map(Into::into).collect();
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_q(&self) -> usize {
        self.n_q
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    /// Order `M` of the dynamics.
    pub fn order(&self) -> usize {
        self.order
    }

    /// State dimension `n_x = M * n_q`.
    pub fn n_x(&self) -> usize {
        self.order * self.n_q
    }

    pub fn t_f(&self) -> f64 {
        self.t_f
    }

    pub fn n_path(&self) -> usize {
        self.n_path
    }

    pub fn n_boundary(&self) -> usize {
        self.n_boundary
    }

    pub fn state_bounds(&self) -> Option<&[Bound]> {
        self.state_bounds.as_deref()
    }

    pub fn control_bounds(&self) -> Option<&[Bound]> {
        self.control_bounds.as_deref()
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }

    /// Order of the problem this one was lifted from (equal to `order` if not lifted).
    pub fn source_order(&self) -> usize {
        self.source_order
    }

    /// Configuration dimension of the problem this one was lifted from.
    pub fn source_n_q(&self) -> usize {
        self.source_n_q
    }

    pub fn is_lifted(&self) -> bool {
        self.source_order != self.order
    }

    /// Raw dynamics call without validation. `out` has length `n_q`.
    #[inline]
    pub fn dynamics_into(&self, x: &[f64], u: &[f64], t: f64, out: &mut [f64]) {
        (self.dynamics)(x, u, t, out)
    }

    #[inline]
    pub fn running_cost(&self, x: &[f64], u: &[f64], t: f64) -> f64 {
        (self.running_cost)(x, u, t)
    }

    #[inline]
    pub fn terminal_cost(&self, x_f: &[f64], t_f: f64) -> f64 {
        (self.terminal_cost)(x_f, t_f)
    }

    #[inline]
    pub fn path_into(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        (self.path_constraints)(x, u, out)
    }

    #[inline]
    pub fn boundary_into(&self, x0: &[f64], xf: &[f64], t_f: f64, out: &mut [f64]) {
        (self.boundary_constraints)(x0, xf, t_f, out)
    }

    pub fn dynamics_fn(&self) -> &DynamicsFn {
        &self.dynamics
    }
}

/// The derivative stack `(q, q', ..., q^(M-1))` at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct StateStack {
    pub levels: Vec<Vec<f64>>,
    pub time: f64,
}

impl StateStack {
    pub fn new(levels: Vec<Vec<f64>>, time: f64) -> Self {
        StateStack { levels, time }
    }

    /// Splits a level-major flat state into `order` levels of `n_q` entries.
    pub fn from_flat(flat: &[f64], n_q: usize, order: usize, time: f64) -> Result<Self> {
        check_len("flat state", n_q * order, flat.len())?;
        let levels = flat.chunks(n_q).map(<[f64]>::to_vec).collect();
        Ok(StateStack { levels, time })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.levels.iter().flatten().copied().collect()
    }
}

/// Evaluates `q^(M) = g(q, q', ..., q^(M-1), u, t)`.
pub fn eval_dynamics(ocp: &OcpDefinition, s: &StateStack, u: &[f64], t: f64) -> Result<Vec<f64>> {
    check_len("derivative levels", ocp.order(), s.levels.len())?;
    for level in &s.levels {
        check_len("configuration level", ocp.n_q(), level.len())?;
    }
    check_len("control", ocp.n_u(), u.len())?;
    let x = s.to_flat();
    let mut out = vec![0.0; ocp.n_q()];
    ocp.dynamics_into(&x, u, t, &mut out);
    Ok(out)
}

/// Rewrites an Mth-order problem as a first-order one over the stacked state.
///
/// The lifted dynamics maps `(x_1, ..., x_M)` to `(x_2, ..., x_M, g(x, u, t))`.
/// Costs, constraints and bounds see the same flat state and are forwarded
/// unchanged. First-order problems are returned as-is.
pub fn lift_to_first_order(ocp: &OcpDefinition) -> OcpDefinition {
    if ocp.order == 1 {
        return ocp.clone();
    }
    let n_q = ocp.n_q;
    let n_x = ocp.n_x();
    let inner = ocp.dynamics.clone();
    let dynamics: DynamicsFn = Arc::new(move |x: &[f64], u: &[f64], t: f64, out: &mut [f64]| {
        let (chain, top) = out.split_at_mut(n_x - n_q);
        chain.copy_from_slice(&x[n_q..]);
        inner(x, u, t, top);
    });
    OcpDefinition {
        name: ocp.name.clone(),
        n_q: n_x,
        n_u: ocp.n_u,
        order: 1,
        t_f: ocp.t_f,
        dynamics,
        running_cost: ocp.running_cost.clone(),
        terminal_cost: ocp.terminal_cost.clone(),
        n_path: ocp.n_path,
        path_constraints: ocp.path_constraints.clone(),
        n_boundary: ocp.n_boundary,
        boundary_constraints: ocp.boundary_constraints.clone(),
        state_bounds: ocp.state_bounds.clone(),
        control_bounds: ocp.control_bounds.clone(),
        units: ocp.units.clone(),
        source_order: ocp.source_order,
        source_n_q: ocp.source_n_q,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator() -> OcpDefinition {
        OcpDefinition::new(
            "osc",
            1,
            0,
            2,
            1.0,
            Arc::new(|x, _, _, out| out[0] = -x[0]),
        )
        .unwrap()
    }

    #[test]
    fn oscillator_acceleration() {
        let ocp = oscillator();
        let s = StateStack::new(vec![vec![1.0], vec![0.0]], 0.0);
        assert_eq!(eval_dynamics(&ocp, &s, &[], 0.0).unwrap(), vec![-1.0]);
    }

    #[test]
    fn rejects_wrong_dimensions() {
        let ocp = oscillator();
        let s = StateStack::new(vec![vec![1.0]], 0.0);
        assert!(matches!(
            eval_dynamics(&ocp, &s, &[], 0.0),
            Err(Error::DimensionMismatch { .. })
        ));
        let s = StateStack::new(vec![vec![1.0], vec![0.0]], 0.0);
        assert!(eval_dynamics(&ocp, &s, &[1.0], 0.0).is_err());
    }

    #[test]
    fn rejects_bad_construction() {
        let f: DynamicsFn = Arc::new(|_, _, _, _| {});
        assert!(OcpDefinition::new("a", 1, 0, 0, 1.0, f.clone()).is_err());
        assert!(OcpDefinition::new("a", 1, 0, 1, 0.0, f.clone()).is_err());
        assert!(OcpDefinition::new("a", 0, 0, 1, 1.0, f).is_err());
    }

    #[test]
    fn lift_second_order() {
        let lifted = lift_to_first_order(&oscillator());
        assert_eq!(lifted.order(), 1);
        assert_eq!(lifted.n_q(), 2);
        let s = StateStack::new(vec![vec![1.0, 0.0]], 0.0);
        assert_eq!(eval_dynamics(&lifted, &s, &[], 0.0).unwrap(), vec![0.0, -1.0]);
        assert!(lifted.is_lifted());
        assert_eq!(lifted.source_order(), 2);
    }

    #[test]
    fn lift_third_order_chain() {
        let ocp = OcpDefinition::new("jerk", 1, 1, 3, 1.0, Arc::new(|_, u, _, out| out[0] = u[0]))
            .unwrap();
        let lifted = lift_to_first_order(&ocp);
        let s = StateStack::new(vec![vec![0.0, 0.0, 0.0]], 0.0);
        assert_eq!(eval_dynamics(&lifted, &s, &[6.0], 0.0).unwrap(), vec![0.0, 0.0, 6.0]);
    }

    #[test]
    fn lift_is_idempotent_on_first_order() {
        let once = lift_to_first_order(&oscillator());
        let twice = lift_to_first_order(&once);
        assert_eq!(twice.n_q(), once.n_q());
        assert_eq!(twice.order(), 1);
        let x = [0.3, -0.7];
        let (mut a, mut b) = ([0.0; 2], [0.0; 2]);
        once.dynamics_into(&x, &[], 0.1, &mut a);
        twice.dynamics_into(&x, &[], 0.1, &mut b);
        assert_eq!(a, b);
    }

    #[test]
    fn flat_round_trip() {
        let s = StateStack::from_flat(&[1.0, 2.0, 3.0, 4.0], 2, 2, 0.5).unwrap();
        assert_eq!(s.levels, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(s.to_flat(), vec![1.0, 2.0, 3.0, 4.0]);
        assert!(StateStack::from_flat(&[1.0, 2.0, 3.0], 2, 2, 0.0).is_err());
    }
}
