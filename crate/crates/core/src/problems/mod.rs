//! Benchmark problems: cart-pole swing-up, a driven harmonic oscillator and a
//! third-order rest-to-rest demonstrator.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Bound, OcpDefinition};
use crate::transcribe::Waypoint;

/// Exact state trajectory `t -> x(t)` (level-major flat state).
pub type ExactFn = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// A problem together with what the experiments need around it.
#[derive(Clone)]
pub struct Benchmark {
    pub ocp: OcpDefinition,
    /// Waypoints for the initial guess.
    pub guess: Vec<Waypoint>,
    /// Known optimal cost of the continuous problem.
    pub optimal_cost: Option<f64>,
    /// Known optimal state trajectory.
    pub exact: Option<ExactFn>,
}

impl fmt::Debug for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Benchmark")
            .field("ocp", &self.ocp)
            .field("guess", &self.guess)
            .field("optimal_cost", &self.optimal_cost)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

/// Names accepted by [`by_name`].
pub const PROBLEM_NAMES: [&str; 3] = ["cartpole", "oscillator", "triple_integrator"];

/// Looks up a benchmark with default parameters.
pub fn by_name(name: &str) -> Result<Benchmark> {
    match name {
        "cartpole" => Ok(cartpole_benchmark(&CartPoleParams::default())),
        "oscillator" => oscillator_benchmark(1.0, 1.0, 0.0, PI),
        "triple_integrator" => Ok(triple_integrator_benchmark()),
        // Bipedal walking and ball throwing need an external multibody model.
        _ => Err(Error::UnknownProblem(name.to_string())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartPoleParams {
    /// Cart mass (kg).
    pub m1: f64,
    /// Pole mass (kg).
    pub m2: f64,
    /// Pole length (m).
    pub ell: f64,
    pub gravity: f64,
    /// Required cart displacement (m).
    pub dist: f64,
    pub t_f: f64,
    /// Force limit (N).
    pub u_max: f64,
    /// Cart travel limit (m).
    pub x_max: f64,
}

impl Default for CartPoleParams {
    fn default() -> Self {
        CartPoleParams {
            m1: 1.0,
            m2: 0.3,
            ell: 0.5,
            gravity: 9.81,
            dist: 1.0,
            t_f: 2.0,
            u_max: 20.0,
            x_max: 2.0,
        }
    }
}

impl CartPoleParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.m1, self.m2, self.ell, self.gravity, self.t_f, self.u_max, self.x_max];
        if positive.iter().all(|v| *v > 0.0 && v.is_finite()) && self.dist.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidInput("cart-pole parameters must be positive".into()))
        }
    }

    /// Accelerations `(q1'', q2'')`. `q2 = 0` hangs down.
    pub fn accelerations(&self, q2: f64, dq2: f64, u: f64) -> [f64; 2] {
        let (s, c) = q2.sin_cos();
        let (m1, m2, l, g) = (self.m1, self.m2, self.ell, self.gravity);
        let den = m1 + m2 * s * s;
        let ddq1 = (l * m2 * s * dq2 * dq2 + u + m2 * g * c * s) / den;
        let ddq2 = -(l * m2 * c * s * dq2 * dq2 + u * c + (m1 + m2) * g * s) / (l * den);
        [ddq1, ddq2]
    }

    /// Total mechanical energy of state `(q1, q2, dq1, dq2)`.
    pub fn energy(&self, x: &[f64]) -> f64 {
        let (q2, dq1, dq2) = (x[1], x[2], x[3]);
        let (s, c) = q2.sin_cos();
        let (m1, m2, l) = (self.m1, self.m2, self.ell);
        let vx = dq1 + l * c * dq2;
        let vy = l * s * dq2;
        0.5 * m1 * dq1 * dq1 + 0.5 * m2 * (vx * vx + vy * vy) - m2 * self.gravity * l * c
    }
}

/// Cart-pole swing-up with default parameters.
pub fn cartpole() -> OcpDefinition {
    cartpole_with(&CartPoleParams::default()).expect("default parameters are valid")
}

/// Cart-pole swing-up: rest at the origin hanging down to rest at `dist`
/// inverted, minimizing the integral of `u^2`.
pub fn cartpole_with(p: &CartPoleParams) -> Result<OcpDefinition> {
    p.validate()?;
    let dyn_p = *p;
    let dist = p.dist;
    OcpDefinition::new(
        "cartpole",
        2,
        1,
        2,
        p.t_f,
        Arc::new(move |x, u, _, out| {
            let a = dyn_p.accelerations(x[1], x[3], u[0]);
            out.copy_from_slice(&a);
        }),
    )?
    .with_running_cost(Arc::new(|_, u, _| u[0] * u[0]))
    .with_boundary_constraints(
        8,
        Arc::new(move |x0, xf, _, out| {
            let target = [dist, PI, 0.0, 0.0];
            for i in 0..4 {
                out[i] = x0[i];
                out[4 + i] = xf[i] - target[i];
            }
        }),
    )
    .with_state_bounds(vec![
        Bound::symmetric(p.x_max),
        Bound::FREE,
        Bound::FREE,
        Bound::FREE,
    ])?
    .with_control_bounds(vec![Bound::symmetric(p.u_max)])?
    .with_units(vec!["m", "rad"])
}

pub fn cartpole_benchmark(p: &CartPoleParams) -> Benchmark {
    Benchmark {
        ocp: cartpole_with(p).expect("validated cart-pole parameters"),
        guess: vec![
            Waypoint::new(0.0, vec![0.0; 4]),
            Waypoint::new(p.t_f, vec![p.dist, PI, 0.0, 0.0]),
        ],
        optimal_cost: None,
        exact: None,
    }
}

/// Driven oscillator `q'' = -omega^2 q + u` from `(q0, v0)` over `[0, t_f]`,
/// minimizing the integral of `u^2`. The optimum is `u = 0` and the free
/// oscillation.
pub fn oscillator(omega: f64) -> Result<OcpDefinition> {
    oscillator_with(omega, 1.0, 0.0, PI)
}

pub fn oscillator_with(omega: f64, q0: f64, v0: f64, t_f: f64) -> Result<OcpDefinition> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidInput(format!("omega must be positive, got {omega}")));
    }
    let w2 = omega * omega;
    OcpDefinition::new(
        "oscillator",
        1,
        1,
        2,
        t_f,
        Arc::new(move |x, u, _, out| out[0] = -w2 * x[0] + u[0]),
    )?
    .with_running_cost(Arc::new(|_, u, _| u[0] * u[0]))
    .with_boundary_constraints(
        2,
        Arc::new(move |x0, _, _, out| {
            out[0] = x0[0] - q0;
            out[1] = x0[1] - v0;
        }),
    )
    .with_units(vec!["m"])
}

/// Free oscillation `(q(t), q'(t))` from `(q0, v0)`.
pub fn oscillator_exact(omega: f64, q0: f64, v0: f64) -> ExactFn {
    Arc::new(move |t| {
        let (s, c) = (omega * t).sin_cos();
        vec![q0 * c + v0 / omega * s, -q0 * omega * s + v0 * c]
    })
}

pub fn oscillator_benchmark(omega: f64, q0: f64, v0: f64, t_f: f64) -> Result<Benchmark> {
    Ok(Benchmark {
        ocp: oscillator_with(omega, q0, v0, t_f)?,
        guess: vec![Waypoint::new(0.0, vec![q0, v0])],
        optimal_cost: Some(0.0),
        exact: Some(oscillator_exact(omega, q0, v0)),
    })
}

/// Rest-to-rest reposition `q: 0 -> 1` of `q''' = u` in one second,
/// minimizing the integral of `u^2`.
pub fn triple_integrator() -> OcpDefinition {
    OcpDefinition::new("triple_integrator", 1, 1, 3, 1.0, Arc::new(|_, u, _, out| out[0] = u[0]))
        .expect("valid definition")
        .with_running_cost(Arc::new(|_, u, _| u[0] * u[0]))
        .with_boundary_constraints(
            6,
            Arc::new(|x0, xf, _, out| {
                out[..3].copy_from_slice(x0);
                out[3] = xf[0] - 1.0;
                out[4] = xf[1];
                out[5] = xf[2];
            }),
        )
        .with_units(vec!["m"])
        .expect("one unit")
}

/// Minimum-jerk quintic and its first two derivatives.
pub fn triple_integrator_exact() -> ExactFn {
    Arc::new(|t| {
        let (t2, t3) = (t * t, t * t * t);
        vec![
            10.0 * t3 - 15.0 * t3 * t + 6.0 * t3 * t2,
            30.0 * t2 - 60.0 * t3 + 30.0 * t3 * t,
            60.0 * t - 180.0 * t2 + 120.0 * t3,
        ]
    })
}

pub fn triple_integrator_benchmark() -> Benchmark {
    Benchmark {
        ocp: triple_integrator(),
        guess: vec![
            Waypoint::new(0.0, vec![0.0; 3]),
            Waypoint::new(1.0, vec![1.0, 0.0, 0.0]),
        ],
        optimal_cost: Some(720.0),
        exact: Some(triple_integrator_exact()),
    }
}
