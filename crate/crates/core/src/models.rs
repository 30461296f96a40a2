//! Example systems at desk scale, with their canonical splittings.
//!
//! Linear models use the `H = ½ xᵀ Q x` convention, so the two-mass energy
//! is `½ (p₁²/m₁ + K₁ q₁² + K (q₁ − q)² + p₂²/m₂ + K₂ q₂²)` with the state
//! ordered as `(p₁, q₁, q₁ − q, p₂, q₂)`.

use nalgebra::{DMatrix, DVector};

use crate::coupling::CoupledNetwork;
use crate::decoupling::{decouple_auto, decouple_with_ports, CouplingBlock, Partition, PortDecoupling};
use crate::error::{PhError, Result};
use crate::linalg;
use crate::system::{LinearPhSystem, DEFAULT_TOL};

fn require_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(PhError::Parameter(format!("{name} must be positive, got {v}")))
    }
}

fn require_nonnegative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(PhError::Parameter(format!("{name} must be non-negative, got {v}")))
    }
}

fn require_symmetric(name: &str, a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(PhError::Parameter(format!("{name} must be square")));
    }
    if linalg::symmetry_violation(a) > DEFAULT_TOL * (1.0 + linalg::max_abs(a)) {
        return Err(PhError::Parameter(format!("{name} must be symmetric")));
    }
    Ok(())
}

fn require_spd(name: &str, a: &DMatrix<f64>) -> Result<()> {
    require_symmetric(name, a)?;
    if a.nrows() == 0 || a.clone().cholesky().is_none() {
        return Err(PhError::Parameter(format!("{name} must be positive definite")));
    }
    Ok(())
}

fn require_psd(name: &str, a: &DMatrix<f64>) -> Result<()> {
    require_symmetric(name, a)?;
    if linalg::min_sym_eigenvalue(a) < -DEFAULT_TOL * (1.0 + a.norm()) {
        return Err(PhError::Parameter(format!("{name} must be positive semidefinite")));
    }
    Ok(())
}

/// Two masses, three springs, two dampers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoMassParams {
    pub m1: f64,
    pub m2: f64,
    /// Coupling spring between the masses.
    pub k: f64,
    pub k1: f64,
    pub k2: f64,
    pub r1: f64,
    pub r2: f64,
}

impl Default for TwoMassParams {
    fn default() -> Self {
        Self { m1: 1.0, m2: 1.0, k: 1.0, k1: 1.0, k2: 1.0, r1: 0.1, r2: 0.1 }
    }
}

impl TwoMassParams {
    pub fn undamped() -> Self {
        Self { r1: 0.0, r2: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("m1", self.m1)?;
        require_positive("m2", self.m2)?;
        require_positive("K", self.k)?;
        require_positive("K1", self.k1)?;
        require_positive("K2", self.k2)?;
        require_nonnegative("r1", self.r1)?;
        require_nonnegative("r2", self.r2)
    }

    /// Diagonal of the energy matrix, `(1/m₁, K₁, K, 1/m₂, K₂)`.
    pub fn energy_diagonal(&self) -> [f64; 5] {
        [1.0 / self.m1, self.k1, self.k, 1.0 / self.m2, self.k2]
    }
}

fn two_mass_structure() -> DMatrix<f64> {
    #[rustfmt::skip]
    let j = DMatrix::from_row_slice(5, 5, &[
        0.0, -1.0, -1.0,  0.0,  0.0,
        1.0,  0.0,  0.0,  0.0,  0.0,
        1.0,  0.0,  0.0, -1.0,  0.0,
        0.0,  0.0,  1.0,  0.0, -1.0,
        0.0,  0.0,  0.0,  1.0,  0.0,
    ]);
    j
}

/// Explicit system `ẋ = (J − R) Q x` without external ports.
pub fn two_mass(p: &TwoMassParams) -> Result<LinearPhSystem> {
    p.validate()?;
    let mut r = DMatrix::zeros(5, 5);
    r[(0, 0)] = p.r1;
    r[(3, 3)] = p.r2;
    let q = DMatrix::from_diagonal(&DVector::from_row_slice(&p.energy_diagonal()));
    LinearPhSystem::explicit(two_mass_structure(), r, DMatrix::zeros(5, 0), q)
}

/// Split `(p₁, q₁, q₁ − q | p₂, q₂)` with identity ports and `Ĉ = −J_offdiag`.
pub fn two_mass_split_identity(p: &TwoMassParams) -> Result<CoupledNetwork> {
    decouple_auto(&two_mass(p)?, &Partition::new(vec![3, 2])?)
}

/// Split `(p₁, q₁, q₁ − q | p₂, q₂)` with scalar ports `B̂₁ = e₃`,
/// `B̂₂ = −e₁` and `Ĉ₁₂ = −1`.
pub fn two_mass_split_scalar(p: &TwoMassParams) -> Result<CoupledNetwork> {
    let ports =
        vec![DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0]), DMatrix::from_column_slice(2, 1, &[-1.0, 0.0])];
    let blocks = [CouplingBlock::new(0, 1, DMatrix::from_element(1, 1, -1.0))];
    match decouple_with_ports(&two_mass(p)?, &Partition::new(vec![3, 2])?, ports, &blocks)? {
        PortDecoupling::Verified(net) => Ok(net),
        PortDecoupling::Failed(f) => Err(PhError::Parameter(format!(
            "scalar-port split failed verification (max residual {:.3e})",
            f.max_residual
        ))),
    }
}

/// Zero-based state order of the `{p₁, p₂} | {q₁, q₁ − q, q₂}` grouping.
pub const TWO_MASS_ALTERNATE_ORDER: [usize; 5] = [0, 3, 1, 2, 4];

/// Port triple proposed for the momentum/position grouping:
/// `B̂₁ = [[1, 0], [0, −1]]`, `B̂₂ = [[−1, 1], [0, 1], [1, 0]]`,
/// `Ĉ₁₂ = [[0, 1], [−1, 0]]`.
pub fn two_mass_alternate_ports() -> (Vec<DMatrix<f64>>, CouplingBlock) {
    let b1 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    let b2 = DMatrix::from_row_slice(3, 2, &[-1.0, 1.0, 0.0, 1.0, 1.0, 0.0]);
    let c12 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    (vec![b1, b2], CouplingBlock::new(0, 1, c12))
}

/// Runs port verification of the momentum/position grouping on the
/// permuted system. The proposed triple does not reproduce the
/// off-diagonal structure (second row of the residual is `[−1, 1, 0]`),
/// so this returns [`PortDecoupling::Failed`].
pub fn two_mass_alternate_split(p: &TwoMassParams) -> Result<PortDecoupling> {
    let t = crate::decoupling::LinearTransform::permutation(&TWO_MASS_ALTERNATE_ORDER)?;
    let permuted = crate::decoupling::apply_transform(&two_mass(p)?, &t)?;
    let (ports, block) = two_mass_alternate_ports();
    decouple_with_ports(&permuted, &Partition::new(vec![2, 3])?, ports, &[block])
}

/// Discretised linear poroelasticity with state `(w, v, p)`: velocity,
/// displacement and pressure. The stiffness matrix `K_u` is supplied
/// already assembled for the chosen Lamé parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PoroelasticParams {
    pub density: f64,
    /// Biot–Willis coupling coefficient.
    pub alpha: f64,
    pub permeability: f64,
    /// Fluid viscosity.
    pub viscosity: f64,
    pub biot_modulus: f64,
    pub mass_u: DMatrix<f64>,
    pub mass_p: DMatrix<f64>,
    pub stiffness_u: DMatrix<f64>,
    pub stiffness_p: DMatrix<f64>,
    /// `n_p × n_u` divergence-type coupling.
    pub coupling: DMatrix<f64>,
    /// Force port `n_u × n_f`.
    pub force_port: DMatrix<f64>,
    /// Injection port `n_p × n_g`.
    pub injection_port: DMatrix<f64>,
}

impl PoroelasticParams {
    /// Three displacement and two pressure unknowns, unit mass matrices,
    /// `K_u = tridiag(−1, 2, −1)`, `K_p = I`, `D = 0.1·ones(2×3)`, identity
    /// ports and all scalar coefficients one.
    pub fn desk() -> Self {
        #[rustfmt::skip]
        let ku = DMatrix::from_row_slice(3, 3, &[
             2.0, -1.0,  0.0,
            -1.0,  2.0, -1.0,
             0.0, -1.0,  2.0,
        ]);
        Self {
            density: 1.0,
            alpha: 1.0,
            permeability: 1.0,
            viscosity: 1.0,
            biot_modulus: 1.0,
            mass_u: DMatrix::identity(3, 3),
            mass_p: DMatrix::identity(2, 2),
            stiffness_u: ku,
            stiffness_p: DMatrix::identity(2, 2),
            coupling: DMatrix::from_element(2, 3, 0.1),
            force_port: DMatrix::identity(3, 3),
            injection_port: DMatrix::identity(2, 2),
        }
    }

    pub fn displacement_dim(&self) -> usize {
        self.mass_u.nrows()
    }

    pub fn pressure_dim(&self) -> usize {
        self.mass_p.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("density", self.density)?;
        require_nonnegative("alpha", self.alpha)?;
        require_nonnegative("permeability", self.permeability)?;
        require_positive("viscosity", self.viscosity)?;
        require_positive("Biot modulus", self.biot_modulus)?;
        require_spd("M_u", &self.mass_u)?;
        require_spd("M_p", &self.mass_p)?;
        require_spd("K_u", &self.stiffness_u)?;
        require_spd("K_p", &self.stiffness_p)?;
        let (nu, np) = (self.displacement_dim(), self.pressure_dim());
        if self.stiffness_u.nrows() != nu || self.stiffness_p.nrows() != np {
            return Err(PhError::Parameter("stiffness and mass matrices differ in size".into()));
        }
        if self.coupling.shape() != (np, nu) {
            return Err(PhError::dim(
                "coupling matrix D",
                format!("{np}x{nu}"),
                format!("{}x{}", self.coupling.nrows(), self.coupling.ncols()),
            ));
        }
        if self.force_port.nrows() != nu {
            return Err(PhError::dim("force port rows", nu, self.force_port.nrows()));
        }
        if self.injection_port.nrows() != np {
            return Err(PhError::dim("injection port rows", np, self.injection_port.nrows()));
        }
        Ok(())
    }
}

/// Implicit system `E ẋ = (J − R) x + B u` with `z = x`, `H = ½ xᵀ E x`,
/// together with its Case-1 split into the mechanical part `(w, v)`
/// (conservative) and the pressure part `p` (dissipative).
pub fn poroelastic(p: &PoroelasticParams) -> Result<(LinearPhSystem, CoupledNetwork)> {
    p.validate()?;
    let (nu, np) = (p.displacement_dim(), p.pressure_dim());
    let n = 2 * nu + np;
    let (w, v, pr) = (0, nu, 2 * nu);

    let flow = linalg::block_diag(&[&(&p.mass_u * p.density), &p.stiffness_u, &(&p.mass_p / p.biot_modulus)]);
    let ad = &p.coupling * p.alpha;
    let mut structure = DMatrix::zeros(n, n);
    structure.view_mut((w, v), (nu, nu)).copy_from(&(-&p.stiffness_u));
    structure.view_mut((v, w), (nu, nu)).copy_from(&p.stiffness_u.transpose());
    structure.view_mut((w, pr), (nu, np)).copy_from(&ad.transpose());
    structure.view_mut((pr, w), (np, nu)).copy_from(&(-&ad));
    let mut dissipation = DMatrix::zeros(n, n);
    dissipation.view_mut((pr, pr), (np, np)).copy_from(&(&p.stiffness_p * (p.permeability / p.viscosity)));
    let (nf, ng) = (p.force_port.ncols(), p.injection_port.ncols());
    let mut port = DMatrix::zeros(n, nf + ng);
    port.view_mut((w, 0), (nu, nf)).copy_from(&p.force_port);
    port.view_mut((pr, nf), (np, ng)).copy_from(&p.injection_port);

    let sys = LinearPhSystem::new(flow, structure, dissipation, port, DMatrix::identity(n, n))?;
    let net = decouple_auto(&sys, &Partition::new(vec![2 * nu, np])?)?;
    Ok((sys, net))
}

/// The same split with compact ports `B̂₁ = [αDᵀ; 0]`, `B̂₂ = I` and
/// `Ĉ₁₂ = −I`, so that `y₁ = αD w` and `y₂ = p`.
pub fn poroelastic_compact_split(p: &PoroelasticParams) -> Result<PortDecoupling> {
    let (sys, _) = poroelastic(p)?;
    let (nu, np) = (p.displacement_dim(), p.pressure_dim());
    let mut b1 = DMatrix::zeros(2 * nu, np);
    b1.view_mut((0, 0), (nu, np)).copy_from(&(p.coupling.transpose() * p.alpha));
    let ports = vec![b1, DMatrix::identity(np, np)];
    let blocks = [CouplingBlock::new(0, 1, -DMatrix::identity(np, np))];
    decouple_with_ports(&sys, &Partition::new(vec![2 * nu, np])?, ports, &blocks)
}

/// Potential formulation on a staggered grid: state `(∂ₜa, φ, h)` with
/// edge, node and face unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxwellParams {
    /// Face–edge incidence (discrete curl), `faces × edges`.
    pub curl: DMatrix<f64>,
    /// Edge–node incidence (discrete gradient), `edges × nodes`.
    pub gradient: DMatrix<f64>,
    pub permittivity: DMatrix<f64>,
    pub permeability: DMatrix<f64>,
    pub conductivity: DMatrix<f64>,
}

impl MaxwellParams {
    /// Planar grid of `nx × ny` unit cells with unit material matrices.
    pub fn grid(nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(PhError::Parameter("grid needs at least one cell per direction".into()));
        }
        let node = |i: usize, j: usize| j * (nx + 1) + i;
        let nodes = (nx + 1) * (ny + 1);
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for j in 0..=ny {
            for i in 0..nx {
                edges.push((node(i, j), node(i + 1, j)));
            }
        }
        for j in 0..ny {
            for i in 0..=nx {
                edges.push((node(i, j), node(i, j + 1)));
            }
        }
        let edge_index = |a: usize, b: usize| edges.iter().position(|&e| e == (a, b)).expect("grid edge");
        let mut gradient = DMatrix::zeros(edges.len(), nodes);
        for (e, &(tail, head)) in edges.iter().enumerate() {
            gradient[(e, tail)] = -1.0;
            gradient[(e, head)] = 1.0;
        }
        let mut curl = DMatrix::zeros(nx * ny, edges.len());
        for j in 0..ny {
            for i in 0..nx {
                let f = j * nx + i;
                // Counter-clockwise circulation.
                curl[(f, edge_index(node(i, j), node(i + 1, j)))] = 1.0;
                curl[(f, edge_index(node(i + 1, j), node(i + 1, j + 1)))] = 1.0;
                curl[(f, edge_index(node(i, j + 1), node(i + 1, j + 1)))] = -1.0;
                curl[(f, edge_index(node(i, j), node(i, j + 1)))] = -1.0;
            }
        }
        let (ne, nf) = (edges.len(), nx * ny);
        Ok(Self {
            curl,
            gradient,
            permittivity: DMatrix::identity(ne, ne),
            permeability: DMatrix::identity(nf, nf),
            conductivity: DMatrix::identity(ne, ne),
        })
    }

    /// Two cells side by side: 6 nodes, 7 edges, 2 faces.
    pub fn desk() -> Self {
        Self::grid(2, 1).expect("non-empty grid")
    }

    pub fn edges(&self) -> usize {
        self.gradient.nrows()
    }
    pub fn nodes(&self) -> usize {
        self.gradient.ncols()
    }
    pub fn faces(&self) -> usize {
        self.curl.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        if self.curl.ncols() != self.edges() {
            return Err(PhError::dim("curl columns", self.edges(), self.curl.ncols()));
        }
        let cg = &self.curl * &self.gradient;
        if cg.iter().any(|&v| v != 0.0) {
            return Err(PhError::Parameter(format!(
                "curl·gradient must vanish (max entry {:.3e})",
                linalg::max_abs(&cg)
            )));
        }
        if self.permittivity.nrows() != self.edges() || self.conductivity.nrows() != self.edges() {
            return Err(PhError::Parameter("edge material matrices have the wrong size".into()));
        }
        if self.permeability.nrows() != self.faces() {
            return Err(PhError::Parameter("face material matrix has the wrong size".into()));
        }
        require_spd("M_eps", &self.permittivity)?;
        require_spd("M_mu", &self.permeability)?;
        require_psd("M_kappa", &self.conductivity)
    }
}

/// Descriptor system with singular flow matrix (the gauge freedom of the
/// potentials), `z = x`, `H = ½ xᵀ E x` and source-current input `[I; Gᵀ; 0]`,
/// plus its Case-1 split into the electric part `(∂ₜa, φ)` and the
/// magnetic part `h`. Structural checks apply; time integration is refused.
pub fn maxwell_grid(p: &MaxwellParams) -> Result<(LinearPhSystem, CoupledNetwork)> {
    p.validate()?;
    let (ne, nn, nf) = (p.edges(), p.nodes(), p.faces());
    let n = ne + nn + nf;
    // [I; Gᵀ] M [I, G] on the (∂ₜa, φ) block.
    let mut lift = DMatrix::zeros(ne, ne + nn);
    lift.view_mut((0, 0), (ne, ne)).fill_with_identity();
    lift.view_mut((0, ne), (ne, nn)).copy_from(&p.gradient);
    let electric = |m: &DMatrix<f64>| lift.transpose() * m * &lift;

    let flow = linalg::block_diag(&[&electric(&p.permittivity), &p.permeability]);
    let dissipation = linalg::block_diag(&[&electric(&p.conductivity), &DMatrix::zeros(nf, nf)]);
    let mut structure = DMatrix::zeros(n, n);
    structure.view_mut((0, ne + nn), (ne, nf)).copy_from(&(-p.curl.transpose()));
    structure.view_mut((ne + nn, 0), (nf, ne)).copy_from(&p.curl);
    let mut port = DMatrix::zeros(n, ne);
    port.view_mut((0, 0), (ne + nn, ne)).copy_from(&lift.transpose());

    let sys = LinearPhSystem::new(flow, structure, dissipation, port, DMatrix::identity(n, n))?;
    let net = decouple_auto(&sys, &Partition::new(vec![ne + nn, nf])?)?;
    Ok((sys, net))
}
