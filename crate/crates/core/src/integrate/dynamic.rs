use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::monolithic::{sample, LinearStepper};
use super::{time_grid, Method, Signal, Trajectory};
use crate::coupling::{CoupledNetwork, CouplingLaw};
use crate::error::{PhError, Result};
use crate::linalg;
use crate::system::{PortHamiltonian, DEFAULT_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IterationMode {
    /// All subsystems use the previous sweep's waveforms; solved concurrently.
    Jacobi,
    /// Subsystems in index order, each using already updated waveforms.
    GaussSeidel,
}

/// Integrator used for one subsystem inside a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InnerSolver {
    #[default]
    Midpoint,
    Strang,
}

/// Settings of a windowed dynamic iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicIteration {
    pub mode: IterationMode,
    /// Window length; must be an integer multiple of the step.
    pub window: f64,
    pub sweeps: usize,
    /// One entry per subsystem; empty means midpoint everywhere.
    pub inner: Vec<InnerSolver>,
}

impl DynamicIteration {
    pub fn new(mode: IterationMode, window: f64, sweeps: usize) -> Self {
        Self { mode, window, sweeps, inner: Vec::new() }
    }

    pub fn with_inner(mut self, inner: Vec<InnerSolver>) -> Self {
        self.inner = inner;
        self
    }
}

struct Sub {
    stepper: LinearStepper,
    ports: DMatrix<f64>,
    /// `B̂ᵢᵀ Lᵢ`.
    readout: DMatrix<f64>,
    /// Off-diagonal coupling blocks `(j, Ĉᵢⱼ)`.
    neighbours: Vec<(usize, DMatrix<f64>)>,
    /// `(B̄ᵢ − P̄ᵢ) ū_i` at every step midpoint.
    external: Vec<DVector<f64>>,
}

impl Sub {
    /// Integrates one window from `x0` against frozen waveforms; returns
    /// the states and exchanged outputs at the window's grid points.
    fn run(
        &self,
        x0: &DVector<f64>,
        first_step: usize,
        waves: &[Vec<DVector<f64>>],
    ) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let len = waves[0].len() - 1;
        let mut states = Vec::with_capacity(len + 1);
        let mut outputs = Vec::with_capacity(len + 1);
        let mut x = x0.clone();
        outputs.push(&self.readout * &x);
        states.push(x.clone());
        for k in 0..len {
            let mut u_hat = DVector::zeros(self.ports.ncols());
            for (j, c) in &self.neighbours {
                let y_mid = (&waves[*j][k] + &waves[*j][k + 1]) * 0.5;
                u_hat -= c * y_mid;
            }
            let forcing = &self.ports * u_hat + &self.external[first_step + k];
            x = self.stepper.step(&x, &forcing);
            outputs.push(&self.readout * &x);
            states.push(x.clone());
        }
        (states, outputs)
    }
}

/// Windowed waveform relaxation on a network with skew coupling matrix.
///
/// Within each window every subsystem is integrated with internal input
/// `ûᵢ = −Σⱼ Ĉᵢⱼ ŷⱼ`, where the midpoint value of `ŷⱼ` is the average of
/// its endpoint samples on the shared step grid. Diagonal blocks `Ĉᵢᵢ`
/// are absorbed into the subsystem's own structure matrix. The first
/// sweep of a window uses outputs frozen at the window start; the last
/// sweep's end state seeds the next window. The converged iteration
/// reproduces the monolithic midpoint trajectory of the condensed network.
pub fn dynamic_iteration(
    net: &CoupledNetwork,
    cfg: &DynamicIteration,
    u: Signal<'_>,
    x0: &DVector<f64>,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<Trajectory> {
    run(net, cfg, u, x0, t0, t1, dt, None)
}

#[allow(clippy::too_many_arguments)]
fn run(
    net: &CoupledNetwork,
    cfg: &DynamicIteration,
    u: Signal<'_>,
    x0: &DVector<f64>,
    t0: f64,
    t1: f64,
    dt: f64,
    jacobi_order: Option<&[usize]>,
) -> Result<Trajectory> {
    let coupling = match net.law() {
        CouplingLaw::Matrix(c) => c,
        CouplingLaw::Relation(_) => {
            return Err(PhError::Parameter(
                "dynamic iteration needs a coupling matrix; eliminate the port relation first".into(),
            ))
        }
    };
    let violation = linalg::skew_violation(coupling);
    if violation > DEFAULT_TOL * (1.0 + linalg::max_abs(coupling)) {
        return Err(PhError::NonSkewCoupling { violation });
    }
    if x0.len() != net.state_dim() {
        return Err(PhError::dim("initial state", net.state_dim(), x0.len()));
    }
    let s = net.len();
    if !cfg.inner.is_empty() && cfg.inner.len() != s {
        return Err(PhError::dim("inner solver list", s, cfg.inner.len()));
    }
    if cfg.sweeps == 0 {
        return Err(PhError::Parameter("at least one sweep is required".into()));
    }
    let grid = time_grid(t0, t1, dt)?;
    let window_steps = (cfg.window / dt).round();
    if window_steps.is_nan() || window_steps < 1.0 || (window_steps * dt - cfg.window).abs() > 1e-9 * cfg.window {
        return Err(PhError::TimeGrid(format!("window {} is not a multiple of dt = {dt}", cfg.window)));
    }
    let window_steps = window_steps as usize;
    let steps = grid.len() - 1;

    let full = net.uncoupled()?;
    let m = full.input_dim();
    let mut mid_inputs = Vec::with_capacity(steps);
    for &t in &grid[..steps] {
        mid_inputs.push(sample(u, t + 0.5 * dt, m)?);
    }

    let sizes = net.state_sizes();
    let state_ranges = linalg::ranges(&sizes);
    let subs = net
        .subsystems()
        .iter()
        .enumerate()
        .map(|(i, sys)| {
            let ports = &net.internal_ports()[i];
            let c_ii = net.coupling_block(i, i).expect("matrix law");
            let structure = sys.structure() - ports * c_ii * ports.transpose();
            let strang = cfg.inner.get(i).copied().unwrap_or_default() == InnerSolver::Strang;
            let stepper = LinearStepper::new(sys, &structure, strang, dt)?;
            let neighbours = (0..s)
                .filter(|&j| j != i)
                .map(|j| (j, net.coupling_block(i, j).expect("matrix law")))
                .filter(|(_, c)| c.iter().any(|&v| v != 0.0))
                .collect();
            let input_map = sys.port() - sys.port_dissipation();
            let external = mid_inputs.iter().map(|um| &input_map * net.external_input_of(i, um)).collect();
            Ok(Sub {
                stepper,
                ports: ports.clone(),
                readout: ports.transpose() * sys.effort_map(),
                neighbours,
                external,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let method = match cfg.mode {
        IterationMode::Jacobi => Method::Jacobi,
        IterationMode::GaussSeidel => Method::GaussSeidel,
    };
    let mut traj = Trajectory::empty(method, dt);
    let mut local: Vec<DVector<f64>> = state_ranges.iter().map(|r| x0.rows(r.start, r.len()).into_owned()).collect();
    traj.push(&full, grid[0], x0.clone(), sample(u, grid[0], m)?);

    let mut start = 0;
    while start < steps {
        let len = window_steps.min(steps - start);
        let mut waves: Vec<Vec<DVector<f64>>> =
            subs.iter().zip(&local).map(|(sub, x)| vec![&sub.readout * x; len + 1]).collect();
        let mut states: Vec<Vec<DVector<f64>>> = Vec::new();
        for _ in 0..cfg.sweeps {
            match cfg.mode {
                IterationMode::Jacobi => {
                    let results: Vec<_> = match jacobi_order {
                        None => subs.par_iter().zip(&local).map(|(sub, x)| sub.run(x, start, &waves)).collect(),
                        Some(order) => {
                            let mut slots: Vec<Option<_>> = vec![None; s];
                            for &i in order {
                                slots[i] = Some(subs[i].run(&local[i], start, &waves));
                            }
                            slots.into_iter().map(|r| r.expect("order covers all subsystems")).collect()
                        }
                    };
                    let (st, outs): (Vec<_>, Vec<_>) = results.into_iter().unzip();
                    states = st;
                    waves = outs;
                }
                IterationMode::GaussSeidel => {
                    states.clear();
                    for i in 0..s {
                        let (st, out) = subs[i].run(&local[i], start, &waves);
                        states.push(st);
                        waves[i] = out;
                    }
                }
            }
        }
        for k in 1..=len {
            let parts: Vec<DVector<f64>> = states.iter().map(|st| st[k].clone()).collect();
            let t = grid[start + k];
            traj.push_midpoint_input(mid_inputs[start + k - 1].clone());
            traj.push(&full, t, linalg::stack_vectors(&parts), sample(u, t, m)?);
        }
        for (i, st) in states.into_iter().enumerate() {
            local[i] = st[len].clone();
        }
        start += len;
    }
    Ok(traj)
}
