use nalgebra::{DMatrix, DVector, Dyn, LU};

use super::{time_grid, Method, Signal, Trajectory};
use crate::error::{PhError, Result};
use crate::linalg;
use crate::system::{LinearPhSystem, PortHamiltonian, FLOW_RCOND_MIN};

/// Relative step-size tolerance of the Newton iteration for callback systems.
pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 25;

/// One factorised midpoint step for `E ẋ = A x + f`:
/// `(E − h/2 A) x₊ = (E + h/2 A) x + h f`.
#[derive(Debug, Clone)]
pub(crate) struct MidpointStepper {
    lu: LU<f64, Dyn, Dyn>,
    explicit: DMatrix<f64>,
    h: f64,
}

impl MidpointStepper {
    pub(crate) fn new(flow: &DMatrix<f64>, operator: &DMatrix<f64>, h: f64) -> Result<Self> {
        let lhs = flow - operator * (0.5 * h);
        if linalg::rcond(&lhs) <= FLOW_RCOND_MIN {
            return Err(PhError::SingularStep);
        }
        Ok(Self { lu: lhs.lu(), explicit: flow + operator * (0.5 * h), h })
    }

    pub(crate) fn step(&self, x: &DVector<f64>, forcing: Option<&DVector<f64>>) -> DVector<f64> {
        let mut rhs = &self.explicit * x;
        if let Some(f) = forcing {
            rhs.axpy(self.h, f, 1.0);
        }
        self.lu.solve(&rhs).expect("factorisation checked at construction")
    }
}

/// Per-step solver of a linear system; `forcing` is the `E ẋ` contribution
/// of all inputs, already evaluated at the step midpoint.
#[derive(Debug, Clone)]
pub(crate) enum LinearStepper {
    Midpoint(MidpointStepper),
    Strang { dissipative: MidpointStepper, conservative: MidpointStepper },
}

impl LinearStepper {
    /// `structure` may differ from `sys.structure()` (self-coupling terms
    /// added by dynamic iteration).
    pub(crate) fn new(sys: &LinearPhSystem, structure: &DMatrix<f64>, strang: bool, dt: f64) -> Result<Self> {
        let rc = linalg::rcond(sys.flow());
        if rc <= FLOW_RCOND_MIN {
            return Err(PhError::SingularFlow { rcond: rc });
        }
        let l = sys.effort_map();
        if strang {
            let dissipative = MidpointStepper::new(sys.flow(), &(-(sys.dissipation() * l)), 0.5 * dt)?;
            let conservative = MidpointStepper::new(sys.flow(), &(structure * l), dt)?;
            Ok(Self::Strang { dissipative, conservative })
        } else {
            let op = (structure - sys.dissipation()) * l;
            Ok(Self::Midpoint(MidpointStepper::new(sys.flow(), &op, dt)?))
        }
    }

    pub(crate) fn step(&self, x: &DVector<f64>, forcing: &DVector<f64>) -> DVector<f64> {
        match self {
            Self::Midpoint(s) => s.step(x, Some(forcing)),
            Self::Strang { dissipative, conservative } => {
                let a = dissipative.step(x, None);
                let b = conservative.step(&a, Some(forcing));
                dissipative.step(&b, None)
            }
        }
    }
}

fn check_start<S: PortHamiltonian + ?Sized>(sys: &S, x0: &DVector<f64>) -> Result<()> {
    if x0.len() != sys.state_dim() {
        return Err(PhError::dim("initial state", sys.state_dim(), x0.len()));
    }
    Ok(())
}

pub(crate) fn sample(u: Signal<'_>, t: f64, m: usize) -> Result<DVector<f64>> {
    let v = u(t);
    if v.len() != m {
        return Err(PhError::dim("input", m, v.len()));
    }
    Ok(v)
}

fn run_linear(
    sys: &LinearPhSystem,
    stepper: &LinearStepper,
    method: Method,
    u: Signal<'_>,
    x0: &DVector<f64>,
    grid: &[f64],
    dt: f64,
) -> Result<Trajectory> {
    let input_map = sys.port() - sys.port_dissipation();
    let m = sys.input_dim();
    let mut traj = Trajectory::empty(method, dt);
    let mut x = x0.clone();
    traj.push(sys, grid[0], x.clone(), sample(u, grid[0], m)?);
    for &t in &grid[1..] {
        let tk = *traj.times().last().expect("non-empty");
        let um = sample(u, tk + 0.5 * dt, m)?;
        x = stepper.step(&x, &(&input_map * &um));
        traj.push_midpoint_input(um);
        traj.push(sys, t, x.clone(), sample(u, t, m)?);
    }
    Ok(traj)
}

/// Implicit midpoint rule on `[t₀, t₁]` with fixed step `dt`.
///
/// Linear systems factorise the step matrix once. Callback systems solve
/// each step by Newton's method with a finite-difference Jacobian.
pub fn implicit_midpoint<S: PortHamiltonian + ?Sized>(
    sys: &S,
    u: Signal<'_>,
    x0: &DVector<f64>,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<Trajectory> {
    check_start(sys, x0)?;
    let grid = time_grid(t0, t1, dt)?;
    if let Some(lin) = sys.as_linear() {
        let stepper = LinearStepper::new(lin, lin.structure(), false, dt)?;
        return run_linear(lin, &stepper, Method::Midpoint, u, x0, &grid, dt);
    }
    let m = sys.input_dim();
    let mut traj = Trajectory::empty(Method::Midpoint, dt);
    let mut x = x0.clone();
    traj.push(sys, grid[0], x.clone(), sample(u, grid[0], m)?);
    for &t in &grid[1..] {
        let tk = *traj.times().last().expect("non-empty");
        let um = sample(u, tk + 0.5 * dt, m)?;
        x = newton_step(sys, &x, &um, dt)?;
        traj.push_midpoint_input(um);
        traj.push(sys, t, x.clone(), sample(u, t, m)?);
    }
    Ok(traj)
}

/// Residual `E(x_m)(x₊ − x) − h[(J − R)(x_m) z(x_m) + (B − P)(x_m) u_m]`.
fn midpoint_residual<S: PortHamiltonian + ?Sized>(
    sys: &S,
    x: &DVector<f64>,
    next: &DVector<f64>,
    um: &DVector<f64>,
    h: f64,
) -> DVector<f64> {
    let xm = (x + next) * 0.5;
    let mats = sys.matrices(&xm);
    let z = sys.effort(&xm);
    let rhs = (&mats.structure - &mats.dissipation) * z + (&mats.port - &mats.port_dissipation) * um;
    &mats.flow * (next - x) - rhs * h
}

fn newton_step<S: PortHamiltonian + ?Sized>(
    sys: &S,
    x: &DVector<f64>,
    um: &DVector<f64>,
    h: f64,
) -> Result<DVector<f64>> {
    let n = x.len();
    let rc = linalg::rcond(&sys.matrices(x).flow);
    if rc <= FLOW_RCOND_MIN {
        return Err(PhError::SingularFlow { rcond: rc });
    }
    let mut next = x.clone();
    let mut update = f64::INFINITY;
    for _ in 0..NEWTON_MAX_ITER {
        let g = midpoint_residual(sys, x, &next, um, h);
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let step = f64::EPSILON.sqrt() * (1.0 + next[j].abs());
            let mut pert = next.clone();
            pert[j] += step;
            let gp = midpoint_residual(sys, x, &pert, um, h);
            jac.set_column(j, &((gp - &g) / step));
        }
        let delta = jac.lu().solve(&(-g)).ok_or(PhError::SingularStep)?;
        next += &delta;
        update = delta.amax();
        if !update.is_finite() {
            break;
        }
        if update <= NEWTON_TOL * (1.0 + next.amax()) {
            return Ok(next);
        }
    }
    Err(PhError::NewtonDivergence { iterations: NEWTON_MAX_ITER, update })
}

/// Strang splitting of a linear system into the dissipative flow
/// `E ẋ = −R L x` (half steps) and the conservative flow
/// `E ẋ = J L x + (B − P) u` (full step), each by the midpoint rule.
pub fn strang_split(
    sys: &LinearPhSystem,
    u: Signal<'_>,
    x0: &DVector<f64>,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<Trajectory> {
    check_start(sys, x0)?;
    let grid = time_grid(t0, t1, dt)?;
    let stepper = LinearStepper::new(sys, sys.structure(), true, dt)?;
    run_linear(sys, &stepper, Method::Strang, u, x0, &grid, dt)
}
