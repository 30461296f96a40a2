//! Single port-Hamiltonian ODE systems
//!
//! ```text
//! E(x) ẋ = (J(x) − R(x)) z(x) + (B(x) − P(x)) u
//!      y = (B(x) + P(x))ᵀ z(x) + (S(x) − N(x)) u
//! ```
//!
//! with `Γ = [[J, B], [−Bᵀ, N]]` skew-symmetric, `W = [[R, P], [Pᵀ, S]]`
//! positive semidefinite and the compatibility condition `∇H = Eᵀ z`.
//!
//! Two variants implement [`PortHamiltonian`]: [`LinearPhSystem`] with
//! constant matrices, effort `z = L x` and `H = ½ xᵀ Q x` where `Q = Eᵀ L`,
//! and [`CallbackPhSystem`] with state-dependent closures. All coupling and
//! decoupling algebra works on the linear variant.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{PhError, Result};
use crate::linalg;

/// Tolerance used when a caller does not supply one.
pub const DEFAULT_TOL: f64 = 1e-10;

/// A flow matrix with reciprocal condition at or below this value is treated
/// as singular (descriptor system).
pub const FLOW_RCOND_MIN: f64 = 1e-12;

/// Acceptance bound for the finite-difference gradient check of callback
/// Hamiltonians, relative to `1 + ‖Eᵀz‖`.
pub const FD_GRADIENT_TOL: f64 = 1e-6;

/// The matrices of a port-Hamiltonian system evaluated at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct PhMatrices {
    pub flow: DMatrix<f64>,
    pub structure: DMatrix<f64>,
    pub dissipation: DMatrix<f64>,
    pub port: DMatrix<f64>,
    pub port_dissipation: DMatrix<f64>,
    /// Symmetric feed-through `S`.
    pub feedthrough_sym: DMatrix<f64>,
    /// Skew feed-through `N`.
    pub feedthrough_skew: DMatrix<f64>,
}

impl PhMatrices {
    /// `Γ = [[J, B], [−Bᵀ, N]]`.
    pub fn gamma(&self) -> DMatrix<f64> {
        let n = self.structure.nrows();
        let m = self.port.ncols();
        let mut g = DMatrix::zeros(n + m, n + m);
        g.view_mut((0, 0), (n, n)).copy_from(&self.structure);
        g.view_mut((0, n), (n, m)).copy_from(&self.port);
        g.view_mut((n, 0), (m, n)).copy_from(&(-self.port.transpose()));
        g.view_mut((n, n), (m, m)).copy_from(&self.feedthrough_skew);
        g
    }

    /// `W = [[R, P], [Pᵀ, S]]`.
    pub fn w(&self) -> DMatrix<f64> {
        let n = self.dissipation.nrows();
        let m = self.port_dissipation.ncols();
        let mut w = DMatrix::zeros(n + m, n + m);
        w.view_mut((0, 0), (n, n)).copy_from(&self.dissipation);
        w.view_mut((0, n), (n, m)).copy_from(&self.port_dissipation);
        w.view_mut((n, 0), (m, n)).copy_from(&self.port_dissipation.transpose());
        w.view_mut((n, n), (m, m)).copy_from(&self.feedthrough_sym);
        w
    }

    fn check_dims(&self, n: usize, m: usize) -> Result<()> {
        let expect = |name: &str, a: &DMatrix<f64>, r: usize, c: usize| {
            if a.shape() == (r, c) {
                Ok(())
            } else {
                Err(PhError::dim(name, format!("{r}x{c}"), format!("{}x{}", a.nrows(), a.ncols())))
            }
        };
        expect("flow matrix", &self.flow, n, n)?;
        expect("structure matrix", &self.structure, n, n)?;
        expect("dissipation matrix", &self.dissipation, n, n)?;
        expect("port matrix", &self.port, n, m)?;
        expect("port dissipation matrix", &self.port_dissipation, n, m)?;
        expect("symmetric feed-through", &self.feedthrough_sym, m, m)?;
        expect("skew feed-through", &self.feedthrough_skew, m, m)
    }
}

/// Common interface of the linear-constant and callback variants.
pub trait PortHamiltonian {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn matrices(&self, x: &DVector<f64>) -> PhMatrices;
    fn effort(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hamiltonian(&self, x: &DVector<f64>) -> f64;

    fn as_linear(&self) -> Option<&LinearPhSystem> {
        None
    }
}

/// Port-Hamiltonian system with constant matrices and linear effort `z = L x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPhSystem {
    mats: PhMatrices,
    effort: DMatrix<f64>,
    energy: DMatrix<f64>,
}

impl LinearPhSystem {
    /// Special form (no port dissipation, no feed-through).
    pub fn new(
        flow: DMatrix<f64>,
        structure: DMatrix<f64>,
        dissipation: DMatrix<f64>,
        port: DMatrix<f64>,
        effort: DMatrix<f64>,
    ) -> Result<Self> {
        let n = structure.nrows();
        let m = port.ncols();
        let mats = PhMatrices {
            flow,
            structure,
            dissipation,
            port,
            port_dissipation: DMatrix::zeros(n, m),
            feedthrough_sym: DMatrix::zeros(m, m),
            feedthrough_skew: DMatrix::zeros(m, m),
        };
        Self::from_matrices(mats, effort)
    }

    /// Explicit system `ẋ = (J − R) Q x + B u` with `E = I` and `L = Q`.
    pub fn explicit(
        structure: DMatrix<f64>,
        dissipation: DMatrix<f64>,
        port: DMatrix<f64>,
        energy: DMatrix<f64>,
    ) -> Result<Self> {
        let n = structure.nrows();
        Self::new(DMatrix::identity(n, n), structure, dissipation, port, energy)
    }

    pub fn from_matrices(mats: PhMatrices, effort: DMatrix<f64>) -> Result<Self> {
        let n = mats.structure.nrows();
        let m = mats.port.ncols();
        mats.check_dims(n, m)?;
        if effort.shape() != (n, n) {
            return Err(PhError::dim(
                "effort matrix",
                format!("{n}x{n}"),
                format!("{}x{}", effort.nrows(), effort.ncols()),
            ));
        }
        let energy = mats.flow.transpose() * &effort;
        Ok(Self { mats, effort, energy })
    }

    /// Replaces the port dissipation `P` and feed-through `S`, `N`.
    pub fn with_feedthrough(
        mut self,
        port_dissipation: DMatrix<f64>,
        feedthrough_sym: DMatrix<f64>,
        feedthrough_skew: DMatrix<f64>,
    ) -> Result<Self> {
        self.mats.port_dissipation = port_dissipation;
        self.mats.feedthrough_sym = feedthrough_sym;
        self.mats.feedthrough_skew = feedthrough_skew;
        self.mats.check_dims(self.state_dim(), self.input_dim())?;
        Ok(self)
    }

    pub fn flow(&self) -> &DMatrix<f64> {
        &self.mats.flow
    }
    pub fn structure(&self) -> &DMatrix<f64> {
        &self.mats.structure
    }
    pub fn dissipation(&self) -> &DMatrix<f64> {
        &self.mats.dissipation
    }
    pub fn port(&self) -> &DMatrix<f64> {
        &self.mats.port
    }
    pub fn port_dissipation(&self) -> &DMatrix<f64> {
        &self.mats.port_dissipation
    }
    pub fn feedthrough_sym(&self) -> &DMatrix<f64> {
        &self.mats.feedthrough_sym
    }
    pub fn feedthrough_skew(&self) -> &DMatrix<f64> {
        &self.mats.feedthrough_skew
    }
    /// `L` in `z = L x`.
    pub fn effort_map(&self) -> &DMatrix<f64> {
        &self.effort
    }
    /// `Q = Eᵀ L`, so that `H(x) = ½ xᵀ Q x`.
    pub fn energy_matrix(&self) -> &DMatrix<f64> {
        &self.energy
    }
    pub fn matrices_ref(&self) -> &PhMatrices {
        &self.mats
    }

    /// True when `P`, `S` and `N` vanish.
    pub fn is_special_form(&self) -> bool {
        linalg::max_abs(&self.mats.port_dissipation) == 0.0
            && linalg::max_abs(&self.mats.feedthrough_sym) == 0.0
            && linalg::max_abs(&self.mats.feedthrough_skew) == 0.0
    }

    /// `y = (B + P)ᵀ L x + (S − N) u`.
    pub fn output(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let z = &self.effort * x;
        (&self.mats.port + &self.mats.port_dissipation).transpose() * z
            + (&self.mats.feedthrough_sym - &self.mats.feedthrough_skew) * u
    }
}

impl PortHamiltonian for LinearPhSystem {
    fn state_dim(&self) -> usize {
        self.mats.structure.nrows()
    }
    fn input_dim(&self) -> usize {
        self.mats.port.ncols()
    }
    fn matrices(&self, _x: &DVector<f64>) -> PhMatrices {
        self.mats.clone()
    }
    fn effort(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.effort * x
    }
    fn hamiltonian(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.energy * x))
    }
    fn as_linear(&self) -> Option<&LinearPhSystem> {
        Some(self)
    }
}

type MatrixFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
type VectorFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
type ScalarFn = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;

/// State-dependent port-Hamiltonian system in special form.
///
/// Unset matrices default to `E = I`, `J = R = 0` and an empty-valued
/// `n × m` port matrix.
#[derive(Clone)]
pub struct CallbackPhSystem {
    n: usize,
    m: usize,
    flow: Option<MatrixFn>,
    structure: Option<MatrixFn>,
    dissipation: Option<MatrixFn>,
    port: Option<MatrixFn>,
    effort: VectorFn,
    hamiltonian: ScalarFn,
}

impl CallbackPhSystem {
    pub fn new(
        n: usize,
        m: usize,
        hamiltonian: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        effort: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            n,
            m,
            flow: None,
            structure: None,
            dissipation: None,
            port: None,
            effort: Arc::new(effort),
            hamiltonian: Arc::new(hamiltonian),
        }
    }

    pub fn with_flow(mut self, f: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.flow = Some(Arc::new(f));
        self
    }
    pub fn with_structure(mut self, f: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.structure = Some(Arc::new(f));
        self
    }
    pub fn with_dissipation(mut self, f: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.dissipation = Some(Arc::new(f));
        self
    }
    pub fn with_port(mut self, f: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.port = Some(Arc::new(f));
        self
    }
}

impl fmt::Debug for CallbackPhSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CallbackPhSystem").field("n", &self.n).field("m", &self.m).finish_non_exhaustive()
    }
}

impl PortHamiltonian for CallbackPhSystem {
    fn state_dim(&self) -> usize {
        self.n
    }
    fn input_dim(&self) -> usize {
        self.m
    }
    fn matrices(&self, x: &DVector<f64>) -> PhMatrices {
        let (n, m) = (self.n, self.m);
        let eval = |f: &Option<MatrixFn>, default: DMatrix<f64>| f.as_ref().map_or(default, |f| f(x));
        PhMatrices {
            flow: eval(&self.flow, DMatrix::identity(n, n)),
            structure: eval(&self.structure, DMatrix::zeros(n, n)),
            dissipation: eval(&self.dissipation, DMatrix::zeros(n, n)),
            port: eval(&self.port, DMatrix::zeros(n, m)),
            port_dissipation: DMatrix::zeros(n, m),
            feedthrough_sym: DMatrix::zeros(m, m),
            feedthrough_skew: DMatrix::zeros(m, m),
        }
    }
    fn effort(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.effort)(x)
    }
    fn hamiltonian(&self, x: &DVector<f64>) -> f64 {
        (self.hamiltonian)(x)
    }
}

/// Outcome of [`validate_structure`]. Measured values are kept alongside the
/// flags so that failures can be reported quantitatively.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureReport {
    pub skew_ok: bool,
    /// Worst `‖Γ + Γᵀ‖_max` over the evaluated states.
    pub skew_violation: f64,
    pub psd_ok: bool,
    /// Smallest eigenvalue of the symmetric part of `W`.
    pub min_eigenvalue: f64,
    pub compat_ok: bool,
    /// Linear systems: `‖Q − Qᵀ‖_max`. Callback systems: worst relative
    /// finite-difference gradient residual.
    pub compat_residual: f64,
    pub flow_regular: bool,
    pub flow_rcond: f64,
}

impl StructureReport {
    /// Flow regularity is reported but not required.
    pub fn passed(&self) -> bool {
        self.skew_ok && self.psd_ok && self.compat_ok
    }
}

impl fmt::Display for StructureReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = |ok: bool| if ok { "ok" } else { "FAIL" };
        writeln!(f, "skew-symmetry of Gamma: {} (max violation {:.3e})", mark(self.skew_ok), self.skew_violation)?;
        writeln!(f, "W positive semidefinite: {} (min eigenvalue {:.6e})", mark(self.psd_ok), self.min_eigenvalue)?;
        writeln!(f, "compatibility grad H = E^T z: {} (residual {:.3e})", mark(self.compat_ok), self.compat_residual)?;
        let reg = if self.flow_regular { "regular" } else { "singular (descriptor system)" };
        write!(f, "flow matrix: {reg} (rcond {:.3e})", self.flow_rcond)
    }
}

/// Checks skew-symmetry of `Γ`, semidefiniteness of `W` and the
/// compatibility `∇H = Eᵀz`, and estimates the conditioning of `E`.
///
/// Linear systems are checked once; `samples` only need matching dimensions.
/// Callback systems are checked at every sample.
pub fn validate_structure<S: PortHamiltonian + ?Sized>(
    sys: &S,
    samples: &[DVector<f64>],
    tol: f64,
) -> Result<StructureReport> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(PhError::Parameter(format!("tolerance must be positive, got {tol}")));
    }
    let (n, m) = (sys.state_dim(), sys.input_dim());
    for s in samples {
        if s.len() != n {
            return Err(PhError::dim("sample state", n, s.len()));
        }
    }

    let linear = sys.as_linear();
    let zero = [DVector::zeros(n)];
    let points: &[DVector<f64>] = match linear {
        Some(_) => &zero,
        None if samples.is_empty() => {
            return Err(PhError::Parameter("callback systems need at least one sample state".into()))
        }
        None => samples,
    };

    let mut report = StructureReport {
        skew_ok: true,
        skew_violation: 0.0,
        psd_ok: true,
        min_eigenvalue: f64::INFINITY,
        compat_ok: true,
        compat_residual: 0.0,
        flow_regular: true,
        flow_rcond: f64::INFINITY,
    };

    for x in points {
        let mats = sys.matrices(x);
        mats.check_dims(n, m)?;

        let gamma = mats.gamma();
        let viol = linalg::skew_violation(&gamma);
        report.skew_violation = report.skew_violation.max(viol);
        report.skew_ok &= viol <= tol * (1.0 + linalg::max_abs(&gamma));

        let w = mats.w();
        let min_eig = linalg::min_sym_eigenvalue(&w);
        report.min_eigenvalue = report.min_eigenvalue.min(min_eig);
        report.psd_ok &= min_eig >= -tol * (1.0 + w.norm());

        let rc = linalg::rcond(&mats.flow);
        report.flow_rcond = report.flow_rcond.min(rc);
        report.flow_regular &= rc > FLOW_RCOND_MIN;

        match linear {
            Some(lin) => {
                let q = lin.energy_matrix();
                let viol = linalg::symmetry_violation(q);
                report.compat_residual = report.compat_residual.max(viol);
                report.compat_ok &= viol <= tol * (1.0 + linalg::max_abs(q));
            }
            None => {
                let z = sys.effort(x);
                if z.len() != n {
                    return Err(PhError::dim("effort vector", n, z.len()));
                }
                let expected = mats.flow.transpose() * z;
                let fd = fd_gradient(|v| sys.hamiltonian(v), x);
                let res = (fd - &expected).norm() / (1.0 + expected.norm());
                report.compat_residual = report.compat_residual.max(res);
                report.compat_ok &= res <= tol.max(FD_GRADIENT_TOL);
            }
        }
    }
    if n + m == 0 {
        report.min_eigenvalue = 0.0;
    }
    Ok(report)
}

/// Central-difference gradient with step `cbrt(ε)·(1 + ‖x‖)`.
pub fn fd_gradient(h: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>) -> DVector<f64> {
    let step = f64::EPSILON.cbrt() * (1.0 + x.norm());
    let mut probe = x.clone();
    DVector::from_fn(x.len(), |i, _| {
        let xi = x[i];
        probe[i] = xi + step;
        let fp = h(&probe);
        probe[i] = xi - step;
        let fm = h(&probe);
        probe[i] = xi;
        (fp - fm) / (2.0 * step)
    })
}

/// State derivative and output at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Dynamics {
    pub xdot: DVector<f64>,
    pub output: DVector<f64>,
}

fn check_point<S: PortHamiltonian + ?Sized>(sys: &S, x: &DVector<f64>, u: &DVector<f64>) -> Result<()> {
    if x.len() != sys.state_dim() {
        return Err(PhError::dim("state", sys.state_dim(), x.len()));
    }
    if u.len() != sys.input_dim() {
        return Err(PhError::dim("input", sys.input_dim(), u.len()));
    }
    Ok(())
}

fn dynamics_with<S: PortHamiltonian + ?Sized>(
    sys: &S,
    mats: &PhMatrices,
    z: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<Dynamics> {
    mats.check_dims(sys.state_dim(), sys.input_dim())?;
    let rc = linalg::rcond(&mats.flow);
    if rc <= FLOW_RCOND_MIN {
        return Err(PhError::SingularFlow { rcond: rc });
    }
    let rhs = (&mats.structure - &mats.dissipation) * z + (&mats.port - &mats.port_dissipation) * u;
    let xdot = mats.flow.clone().lu().solve(&rhs).ok_or(PhError::SingularFlow { rcond: rc })?;
    let output =
        (&mats.port + &mats.port_dissipation).transpose() * z + (&mats.feedthrough_sym - &mats.feedthrough_skew) * u;
    Ok(Dynamics { xdot, output })
}

/// Solves `E ẋ = (J − R) z + (B − P) u` and evaluates the output.
pub fn eval_dynamics<S: PortHamiltonian + ?Sized>(sys: &S, x: &DVector<f64>, u: &DVector<f64>) -> Result<Dynamics> {
    check_point(sys, x, u)?;
    let mats = sys.matrices(x);
    let z = sys.effort(x);
    dynamics_with(sys, &mats, &z, u)
}

/// `|∇H·ẋ − (−[z;u]ᵀ W [z;u] + uᵀy)|` with `∇H = Eᵀz`.
///
/// Vanishes in exact arithmetic for every structurally valid system; a
/// symmetric component in `J` shows up as `|zᵀ J_sym z|`.
pub fn power_balance_residual<S: PortHamiltonian + ?Sized>(sys: &S, x: &DVector<f64>, u: &DVector<f64>) -> Result<f64> {
    check_point(sys, x, u)?;
    let mats = sys.matrices(x);
    let z = sys.effort(x);
    let d = dynamics_with(sys, &mats, &z, u)?;
    let grad = mats.flow.transpose() * &z;
    let power = grad.dot(&d.xdot);
    let zu = linalg::stack_vectors(&[z, u.clone()]);
    let supplied = -zu.dot(&(mats.w() * &zu)) + u.dot(&d.output);
    Ok((power - supplied).abs())
}
