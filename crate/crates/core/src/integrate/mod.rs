//! Fixed-step time integration and discrete energy accounting.
//!
//! * [`implicit_midpoint`]: monolithic, second order, exact discrete energy
//!   balance for quadratic Hamiltonians.
//! * [`strang_split`]: dissipative half step, conservative full step,
//!   dissipative half step, each by the midpoint rule.
//! * [`dynamic_iteration`]: windowed waveform relaxation on a
//!   [`CoupledNetwork`](crate::CoupledNetwork), Jacobi or Gauss–Seidel.
//!
//! Input signals are sampled at step midpoints; trajectories store both
//! the endpoint samples and the midpoint samples actually used.

mod dynamic;
mod energy;
mod monolithic;

pub use dynamic::{dynamic_iteration, DynamicIteration, InnerSolver, IterationMode};
pub use energy::{energy_report, EnergyReport, MONOTONE_TOL};
pub use monolithic::{implicit_midpoint, strang_split, NEWTON_MAX_ITER, NEWTON_TOL};

use std::fmt;

use nalgebra::DVector;

use crate::error::{PhError, Result};
use crate::system::PortHamiltonian;

/// Time-dependent input `t ↦ u(t)`.
pub type Signal<'a> = &'a (dyn Fn(f64) -> DVector<f64> + Sync);

/// `u ≡ 0` with `m` components.
pub fn zero_input(m: usize) -> impl Fn(f64) -> DVector<f64> + Sync {
    move |_| DVector::zeros(m)
}

/// `u ≡ value`.
pub fn constant_input(value: DVector<f64>) -> impl Fn(f64) -> DVector<f64> + Sync {
    move |_| value.clone()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Midpoint,
    Strang,
    Jacobi,
    GaussSeidel,
    /// Produced outside this crate (reference solvers, files).
    External,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::Midpoint => "midpoint",
            Method::Strang => "strang",
            Method::Jacobi => "jacobi",
            Method::GaussSeidel => "gauss-seidel",
            Method::External => "external",
        };
        f.write_str(s)
    }
}

/// Uniform grid `t₀ + k·dt`, `k = 0..=steps`. `t₁ − t₀` must be an integer
/// multiple of `dt` up to a relative `1e-9`.
pub fn time_grid(t0: f64, t1: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(PhError::TimeGrid(format!("step must be positive, got {dt}")));
    }
    if !(t0.is_finite() && t1.is_finite() && t1 >= t0) {
        return Err(PhError::TimeGrid(format!("interval [{t0}, {t1}] is invalid")));
    }
    let span = t1 - t0;
    let steps = (span / dt).round();
    if (steps * dt - span).abs() > 1e-9 * span.max(dt) {
        return Err(PhError::TimeGrid(format!("interval length {span} is not a multiple of dt = {dt}")));
    }
    Ok((0..=steps as usize).map(|k| t0 + k as f64 * dt).collect())
}

/// Time grid, states, endpoint inputs and outputs, midpoint inputs and
/// Hamiltonian values of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    method: Method,
    dt: f64,
    times: Vec<f64>,
    states: Vec<DVector<f64>>,
    inputs: Vec<DVector<f64>>,
    outputs: Vec<DVector<f64>>,
    midpoint_inputs: Vec<DVector<f64>>,
    energy: Vec<f64>,
}

impl Trajectory {
    /// Wraps externally computed states on the grid `times`, sampling `u`
    /// and evaluating outputs and energies with `sys`.
    pub fn from_states<S: PortHamiltonian + ?Sized>(
        method: Method,
        sys: &S,
        times: Vec<f64>,
        states: Vec<DVector<f64>>,
        u: Signal<'_>,
    ) -> Result<Self> {
        if times.len() != states.len() {
            return Err(PhError::dim("trajectory states", times.len(), states.len()));
        }
        if times.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
            return Err(PhError::TimeGrid("time grid must be strictly increasing".into()));
        }
        let n = sys.state_dim();
        if let Some(bad) = states.iter().find(|x| x.len() != n) {
            return Err(PhError::dim("trajectory state", n, bad.len()));
        }
        let dt = match times.len() {
            0 | 1 => 0.0,
            k => (times[k - 1] - times[0]) / (k - 1) as f64,
        };
        let mut traj = Self::empty(method, dt);
        let midpoint_inputs = times.windows(2).map(|w| u(0.5 * (w[0] + w[1]))).collect::<Vec<_>>();
        if let Some(bad) = midpoint_inputs.iter().find(|v| v.len() != sys.input_dim()) {
            return Err(PhError::dim("input", sys.input_dim(), bad.len()));
        }
        for (t, x) in times.into_iter().zip(states) {
            traj.push(sys, t, x, u(t));
        }
        traj.midpoint_inputs = midpoint_inputs;
        Ok(traj)
    }

    pub(crate) fn empty(method: Method, dt: f64) -> Self {
        Self {
            method,
            dt,
            times: Vec::new(),
            states: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            midpoint_inputs: Vec::new(),
            energy: Vec::new(),
        }
    }

    pub(crate) fn push<S: PortHamiltonian + ?Sized>(&mut self, sys: &S, t: f64, x: DVector<f64>, u: DVector<f64>) {
        let mats = sys.matrices(&x);
        let z = sys.effort(&x);
        let y = (&mats.port + &mats.port_dissipation).transpose() * z
            + (&mats.feedthrough_sym - &mats.feedthrough_skew) * &u;
        self.energy.push(sys.hamiltonian(&x));
        self.times.push(t);
        self.states.push(x);
        self.inputs.push(u);
        self.outputs.push(y);
    }

    pub(crate) fn push_midpoint_input(&mut self, u: DVector<f64>) {
        self.midpoint_inputs.push(u);
    }

    pub fn method(&self) -> Method {
        self.method
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn times(&self) -> &[f64] {
        &self.times
    }
    pub fn states(&self) -> &[DVector<f64>] {
        &self.states
    }
    pub fn inputs(&self) -> &[DVector<f64>] {
        &self.inputs
    }
    pub fn outputs(&self) -> &[DVector<f64>] {
        &self.outputs
    }
    pub fn midpoint_inputs(&self) -> &[DVector<f64>] {
        &self.midpoint_inputs
    }
    /// Hamiltonian at every grid point.
    pub fn energy(&self) -> &[f64] {
        &self.energy
    }
    /// Number of steps (grid points minus one; zero for an empty run).
    pub fn steps(&self) -> usize {
        self.times.len().saturating_sub(1)
    }
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
    pub fn state_dim(&self) -> Option<usize> {
        self.states.first().map(|x| x.len())
    }
    pub fn final_state(&self) -> Option<&DVector<f64>> {
        self.states.last()
    }

    /// `max_k ‖x_k − x'_k‖_∞` against a trajectory on the same grid.
    pub fn max_deviation(&self, other: &Trajectory) -> Result<f64> {
        if self.states.len() != other.states.len() {
            return Err(PhError::dim("compared trajectory length", self.states.len(), other.states.len()));
        }
        Ok(self.states.iter().zip(&other.states).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max))
    }
}
