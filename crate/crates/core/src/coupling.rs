//! Condensation of coupled subsystems into one monolithic system.
//!
//! Subsystem `i` carries internal ports `B̂ᵢ` (columns wired to other
//! subsystems) separately from its external port `B̄ᵢ` (the port of the
//! [`LinearPhSystem`] itself). The internal ports obey either
//!
//! * an interconnection `û + Ĉ ŷ = 0` with `ŷ = B̂ᵀ z`, which adds
//!   `−B̂ Ĉ B̂ᵀ` to the monolithic structure matrix, or
//! * a general relation `M û + N ŷ = 0`, assembled into a descriptor
//!   system with dummy port variables by [`build_phdae`].

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{PhError, Result};
use crate::linalg;
use crate::system::{validate_structure, LinearPhSystem, PhMatrices, PortHamiltonian, DEFAULT_TOL, FLOW_RCOND_MIN};

/// How the external ports of the subsystems appear on the monolithic system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExternalLayout {
    /// Each subsystem has its own input `ūᵢ`; `B̄ = blockdiag(B̄ᵢ)`.
    #[default]
    Separate,
    /// All subsystems see the same input `u`; `B̄ = [B̄₁; …; B̄ₛ]` and the
    /// monolithic output is the sum of the subsystem outputs.
    Shared,
}

/// General linear port relation `M û + N ŷ = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPortRelation {
    input: DMatrix<f64>,
    output: DMatrix<f64>,
}

impl LinearPortRelation {
    pub fn new(input: DMatrix<f64>, output: DMatrix<f64>) -> Result<Self> {
        if input.shape() != output.shape() {
            return Err(PhError::dim(
                "port relation (M, N)",
                format!("{}x{}", input.nrows(), input.ncols()),
                format!("{}x{}", output.nrows(), output.ncols()),
            ));
        }
        Ok(Self { input, output })
    }

    /// `M`.
    pub fn input_coeff(&self) -> &DMatrix<f64> {
        &self.input
    }
    /// `N`.
    pub fn output_coeff(&self) -> &DMatrix<f64> {
        &self.output
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CouplingLaw {
    /// `û + Ĉ ŷ = 0`.
    Matrix(DMatrix<f64>),
    Relation(LinearPortRelation),
}

/// `s` linear subsystems, their internal ports and the coupling law.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledNetwork {
    subsystems: Vec<LinearPhSystem>,
    ports: Vec<DMatrix<f64>>,
    law: CouplingLaw,
    external: ExternalLayout,
}

impl CoupledNetwork {
    pub fn new(
        subsystems: Vec<LinearPhSystem>,
        ports: Vec<DMatrix<f64>>,
        law: CouplingLaw,
        external: ExternalLayout,
    ) -> Result<Self> {
        if subsystems.is_empty() {
            return Err(PhError::Parameter("a network needs at least one subsystem".into()));
        }
        if ports.len() != subsystems.len() {
            return Err(PhError::dim("internal port list", subsystems.len(), ports.len()));
        }
        for (i, (sys, b)) in subsystems.iter().zip(&ports).enumerate() {
            if b.nrows() != sys.state_dim() {
                return Err(PhError::dim(format!("internal port of subsystem {i} (rows)"), sys.state_dim(), b.nrows()));
            }
        }
        if external == ExternalLayout::Shared {
            let m = subsystems[0].input_dim();
            if let Some((i, s)) = subsystems.iter().enumerate().find(|(_, s)| s.input_dim() != m) {
                return Err(PhError::dim(format!("shared external input of subsystem {i}"), m, s.input_dim()));
            }
        }
        let total: usize = ports.iter().map(|p| p.ncols()).sum();
        match &law {
            CouplingLaw::Matrix(c) => {
                if c.shape() != (total, total) {
                    return Err(PhError::dim(
                        "coupling matrix",
                        format!("{total}x{total}"),
                        format!("{}x{}", c.nrows(), c.ncols()),
                    ));
                }
            }
            CouplingLaw::Relation(rel) => {
                if rel.input.ncols() != total {
                    return Err(PhError::dim("port relation columns", total, rel.input.ncols()));
                }
            }
        }
        Ok(Self { subsystems, ports, law, external })
    }

    pub fn subsystems(&self) -> &[LinearPhSystem] {
        &self.subsystems
    }
    pub fn internal_ports(&self) -> &[DMatrix<f64>] {
        &self.ports
    }
    pub fn law(&self) -> &CouplingLaw {
        &self.law
    }
    pub fn external_layout(&self) -> ExternalLayout {
        self.external
    }

    pub fn len(&self) -> usize {
        self.subsystems.len()
    }
    pub fn is_empty(&self) -> bool {
        self.subsystems.is_empty()
    }

    pub fn state_sizes(&self) -> Vec<usize> {
        self.subsystems.iter().map(|s| s.state_dim()).collect()
    }
    pub fn state_dim(&self) -> usize {
        self.state_sizes().iter().sum()
    }

    /// `(m̂₁, …, m̂ₛ)`.
    pub fn port_layout(&self) -> Vec<usize> {
        self.ports.iter().map(|p| p.ncols()).collect()
    }

    pub fn external_dim(&self) -> usize {
        match self.external {
            ExternalLayout::Separate => self.subsystems.iter().map(|s| s.input_dim()).sum(),
            ExternalLayout::Shared => self.subsystems[0].input_dim(),
        }
    }

    /// `B̂ = blockdiag(B̂₁, …, B̂ₛ)`.
    pub fn stacked_ports(&self) -> DMatrix<f64> {
        linalg::block_diag(&self.ports.iter().collect::<Vec<_>>())
    }

    /// Block `Ĉᵢⱼ` of the coupling matrix, `None` for a general relation.
    pub fn coupling_block(&self, i: usize, j: usize) -> Option<DMatrix<f64>> {
        let CouplingLaw::Matrix(c) = &self.law else { return None };
        let r = linalg::ranges(&self.port_layout());
        Some(c.view((r[i].start, r[j].start), (r[i].len(), r[j].len())).into_owned())
    }

    /// Slice of the external input that subsystem `i` sees.
    pub fn external_input_of(&self, i: usize, u: &DVector<f64>) -> DVector<f64> {
        match self.external {
            ExternalLayout::Shared => u.clone(),
            ExternalLayout::Separate => {
                let sizes: Vec<usize> = self.subsystems.iter().map(|s| s.input_dim()).collect();
                let r = &linalg::ranges(&sizes)[i];
                u.rows(r.start, r.len()).into_owned()
            }
        }
    }

    pub fn validate(&self, tol: f64) -> Result<Vec<crate::StructureReport>> {
        self.subsystems.iter().map(|s| validate_structure(s, &[], tol)).collect()
    }

    /// `Σ Hᵢ(xᵢ)` for a stacked state.
    pub fn hamiltonian(&self, x: &DVector<f64>) -> f64 {
        let sizes = self.state_sizes();
        linalg::ranges(&sizes)
            .into_iter()
            .zip(&self.subsystems)
            .map(|(r, s)| s.hamiltonian(&x.rows(r.start, r.len()).into_owned()))
            .sum()
    }

    fn require_valid_subsystems(&self) -> Result<()> {
        for (index, rep) in self.validate(DEFAULT_TOL)?.iter().enumerate() {
            if !rep.passed() {
                return Err(PhError::InvalidSubsystem { index });
            }
        }
        Ok(())
    }

    /// The block-diagonal system obtained with all internal ports cut.
    pub fn uncoupled(&self) -> Result<LinearPhSystem> {
        let subs = &self.subsystems;
        let bd = |f: fn(&LinearPhSystem) -> &DMatrix<f64>| linalg::block_diag(&subs.iter().map(f).collect::<Vec<_>>());
        let (port, port_dissipation, feedthrough_sym, feedthrough_skew) = match self.external {
            ExternalLayout::Separate => (
                bd(LinearPhSystem::port),
                bd(LinearPhSystem::port_dissipation),
                bd(LinearPhSystem::feedthrough_sym),
                bd(LinearPhSystem::feedthrough_skew),
            ),
            ExternalLayout::Shared => {
                let m = subs[0].input_dim();
                let stack = |f: fn(&LinearPhSystem) -> &DMatrix<f64>| {
                    linalg::vstack(&subs.iter().map(f).collect::<Vec<_>>(), m)
                };
                let sum = |f: fn(&LinearPhSystem) -> &DMatrix<f64>| {
                    subs.iter().map(f).fold(DMatrix::zeros(m, m), |acc, a| acc + a)
                };
                (
                    stack(LinearPhSystem::port),
                    stack(LinearPhSystem::port_dissipation),
                    sum(LinearPhSystem::feedthrough_sym),
                    sum(LinearPhSystem::feedthrough_skew),
                )
            }
        };
        let mats = PhMatrices {
            flow: bd(LinearPhSystem::flow),
            structure: bd(LinearPhSystem::structure),
            dissipation: bd(LinearPhSystem::dissipation),
            port,
            port_dissipation,
            feedthrough_sym,
            feedthrough_skew,
        };
        LinearPhSystem::from_matrices(mats, bd(LinearPhSystem::effort_map))
    }

    /// Dispatches on the coupling law: skew interconnections go through
    /// [`condense_skew`], general matrices through [`condense_general`] and
    /// relations through [`build_phdae`] + [`eliminate_ports`].
    pub fn condense(&self) -> Result<Condensation> {
        match &self.law {
            CouplingLaw::Matrix(c) => {
                if is_skew(c) {
                    condense_skew(self).map(Condensation::Monolithic)
                } else {
                    condense_general(self, c)
                }
            }
            CouplingLaw::Relation(rel) => eliminate_ports(&build_phdae(self, rel)?),
        }
    }
}

fn is_skew(c: &DMatrix<f64>) -> bool {
    linalg::skew_violation(c) <= DEFAULT_TOL * (1.0 + linalg::max_abs(c))
}

/// Result of a condensation that may leave the ODE class.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Condensation {
    Monolithic(LinearPhSystem),
    /// `blockdiag(Rᵢ) + B̂ Ĉ_symm B̂ᵀ` is indefinite; the coupled system is
    /// only representable as a descriptor system via [`build_phdae`].
    IndefiniteDissipation {
        min_eigenvalue: f64,
    },
}

impl Condensation {
    pub fn system(&self) -> Option<&LinearPhSystem> {
        match self {
            Condensation::Monolithic(s) => Some(s),
            Condensation::IndefiniteDissipation { .. } => None,
        }
    }

    pub fn into_system(self) -> Option<LinearPhSystem> {
        match self {
            Condensation::Monolithic(s) => Some(s),
            Condensation::IndefiniteDissipation { .. } => None,
        }
    }
}

impl fmt::Display for Condensation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condensation::Monolithic(s) => write!(f, "monolithic system with {} states", s.state_dim()),
            Condensation::IndefiniteDissipation { min_eigenvalue } => write!(
                f,
                "coupled dissipation matrix is indefinite (min eigenvalue {min_eigenvalue:.6e}); \
                 use the descriptor formulation (build_phdae)"
            ),
        }
    }
}

fn with_coupling(
    base: &LinearPhSystem,
    ports: &DMatrix<f64>,
    skew: &DMatrix<f64>,
    sym: Option<&DMatrix<f64>>,
) -> Result<LinearPhSystem> {
    let mut mats = base.matrices_ref().clone();
    mats.structure -= ports * skew * ports.transpose();
    if let Some(sym) = sym {
        mats.dissipation += ports * sym * ports.transpose();
    }
    LinearPhSystem::from_matrices(mats, base.effort_map().clone())
}

/// Monolithic system for a skew interconnection:
/// `J = blockdiag(Jᵢ) − B̂ Ĉ B̂ᵀ`, everything else block-diagonal.
pub fn condense_skew(net: &CoupledNetwork) -> Result<LinearPhSystem> {
    let c = match &net.law {
        CouplingLaw::Matrix(c) => c,
        CouplingLaw::Relation(_) => {
            return Err(PhError::Parameter(
                "network uses a general port relation; use build_phdae and eliminate_ports".into(),
            ))
        }
    };
    if !is_skew(c) {
        return Err(PhError::NonSkewCoupling { violation: linalg::skew_violation(c) });
    }
    net.require_valid_subsystems()?;
    with_coupling(&net.uncoupled()?, &net.stacked_ports(), c, None)
}

/// Condensation for an arbitrary coupling matrix: the skew part of `Ĉ`
/// enters `J`, the symmetric part enters `R`. An indefinite result is a
/// tagged outcome, not an error.
pub fn condense_general(net: &CoupledNetwork, coupling: &DMatrix<f64>) -> Result<Condensation> {
    let total: usize = net.port_layout().iter().sum();
    if coupling.shape() != (total, total) {
        return Err(PhError::dim(
            "coupling matrix",
            format!("{total}x{total}"),
            format!("{}x{}", coupling.nrows(), coupling.ncols()),
        ));
    }
    net.require_valid_subsystems()?;
    general_from_parts(&net.uncoupled()?, &net.stacked_ports(), coupling)
}

fn general_from_parts(base: &LinearPhSystem, ports: &DMatrix<f64>, coupling: &DMatrix<f64>) -> Result<Condensation> {
    let sys = with_coupling(base, ports, &linalg::skew_part(coupling), Some(&linalg::sym_part(coupling)))?;
    let r = sys.dissipation();
    let min_eig = linalg::min_sym_eigenvalue(r);
    if min_eig < -DEFAULT_TOL * (1.0 + r.norm()) {
        return Ok(Condensation::IndefiniteDissipation { min_eigenvalue: min_eig });
    }
    Ok(Condensation::Monolithic(sys))
}

/// Descriptor form of a network coupled by `M û + N ŷ = 0`.
///
/// The extended state is `(x, û, ŷ, λ)` with block sizes `(n, m̂, m̂, k)`,
/// `k` the number of relation rows. The extended operator is
///
/// ```text
/// [ J − R   B̂    0    0  ]
/// [ −B̂ᵀ     0    I   −Mᵀ ]
/// [ 0      −I    0   −Nᵀ ]
/// [ 0       M    N    0  ]
/// ```
///
/// acting on `(∇H, û, ŷ, λ)`; the input `[ū; u_inj]` enters through
/// `[[B̄, 0], [0, 0], [0, I], [0, 0]]` and the output is `y = ŷ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhdaeSystem {
    sizes: [usize; 4],
    flow: DMatrix<f64>,
    operator: DMatrix<f64>,
    dissipation: DMatrix<f64>,
    port: DMatrix<f64>,
    base: LinearPhSystem,
    ports: DMatrix<f64>,
    relation: LinearPortRelation,
}

impl PhdaeSystem {
    /// Block sizes `(n, m̂, m̂, k)`.
    pub fn block_sizes(&self) -> [usize; 4] {
        self.sizes
    }
    pub fn dim(&self) -> usize {
        self.sizes.iter().sum()
    }
    /// `diag(E, 0, 0, 0)`.
    pub fn flow(&self) -> &DMatrix<f64> {
        &self.flow
    }
    /// The full extended operator (structure minus dissipation).
    pub fn operator(&self) -> &DMatrix<f64> {
        &self.operator
    }
    /// `diag(R, 0, 0, 0)`.
    pub fn dissipation(&self) -> &DMatrix<f64> {
        &self.dissipation
    }
    /// Skew part of the operator.
    pub fn structure(&self) -> DMatrix<f64> {
        &self.operator + &self.dissipation
    }
    pub fn port(&self) -> &DMatrix<f64> {
        &self.port
    }
    pub fn relation(&self) -> &LinearPortRelation {
        &self.relation
    }
    /// The uncoupled block-diagonal subsystem part.
    pub fn base(&self) -> &LinearPhSystem {
        &self.base
    }
    pub fn internal_ports(&self) -> &DMatrix<f64> {
        &self.ports
    }

    /// `‖A + Aᵀ + 2·diag(R, 0, 0, 0)‖_max`.
    pub fn structure_violation(&self) -> f64 {
        let s = &self.operator + self.operator.transpose() + &self.dissipation * 2.0;
        linalg::max_abs(&s)
    }
}

pub fn build_phdae(net: &CoupledNetwork, rel: &LinearPortRelation) -> Result<PhdaeSystem> {
    let total: usize = net.port_layout().iter().sum();
    if rel.input.ncols() != total {
        return Err(PhError::dim("port relation columns", total, rel.input.ncols()));
    }
    let base = net.uncoupled()?;
    let ports = net.stacked_ports();
    let (n, mh, k) = (base.state_dim(), total, rel.input.nrows());
    let m_ext = base.input_dim();
    let dim = n + 2 * mh + k;
    let (o_u, o_y, o_l) = (n, n + mh, n + 2 * mh);

    let mut flow = DMatrix::zeros(dim, dim);
    flow.view_mut((0, 0), (n, n)).copy_from(base.flow());

    let mut dissipation = DMatrix::zeros(dim, dim);
    dissipation.view_mut((0, 0), (n, n)).copy_from(base.dissipation());

    let eye = DMatrix::<f64>::identity(mh, mh);
    let mut a = DMatrix::zeros(dim, dim);
    a.view_mut((0, 0), (n, n)).copy_from(&(base.structure() - base.dissipation()));
    a.view_mut((0, o_u), (n, mh)).copy_from(&ports);
    a.view_mut((o_u, 0), (mh, n)).copy_from(&(-ports.transpose()));
    a.view_mut((o_u, o_y), (mh, mh)).copy_from(&eye);
    a.view_mut((o_u, o_l), (mh, k)).copy_from(&(-rel.input.transpose()));
    a.view_mut((o_y, o_u), (mh, mh)).copy_from(&(-&eye));
    a.view_mut((o_y, o_l), (mh, k)).copy_from(&(-rel.output.transpose()));
    a.view_mut((o_l, o_u), (k, mh)).copy_from(&rel.input);
    a.view_mut((o_l, o_y), (k, mh)).copy_from(&rel.output);

    let mut port = DMatrix::zeros(dim, m_ext + mh);
    port.view_mut((0, 0), (n, m_ext)).copy_from(base.port());
    port.view_mut((o_y, m_ext), (mh, mh)).copy_from(&eye);

    Ok(PhdaeSystem { sizes: [n, mh, mh, k], flow, operator: a, dissipation, port, base, ports, relation: rel.clone() })
}

/// Eliminates the dummy port variables when `M` is invertible:
/// `û = −M⁻¹N ŷ`, then condenses with `Ĉ = M⁻¹N`.
pub fn eliminate_ports(dae: &PhdaeSystem) -> Result<Condensation> {
    let m = &dae.relation.input;
    if !m.is_square() || linalg::rcond(m) <= FLOW_RCOND_MIN {
        return Err(PhError::NotEliminable);
    }
    let coupling = m.clone().lu().solve(&dae.relation.output).ok_or(PhError::NotEliminable)?;
    general_from_parts(&dae.base, &dae.ports, &coupling)
}
