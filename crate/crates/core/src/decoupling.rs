//! Splitting a monolithic system into coupled subsystems.
//!
//! After an optional invertible change of state `w = T x`, the transformed
//! matrices are sliced along a [`Partition`]. When the Hamiltonian and the
//! flow matrix are block-diagonal, the diagonal blocks define the
//! subsystems and the off-diagonal blocks become the coupling:
//!
//! * no off-diagonal dissipation: identity ports and the skew coupling
//!   `Ĉ = −J̃_offdiag` ([`decouple_auto`]),
//! * off-diagonal dissipation: identity ports and the relation `M = I`,
//!   `N = −J̃_offdiag + R̃_offdiag` ([`decouple_auto`]),
//! * user-chosen ports `B̂ᵢ` and blocks `Ĉᵢⱼ`, accepted after verifying
//!   `J̃ᵢⱼ − R̃ᵢⱼ = −B̂ᵢ Ĉᵢⱼ B̂ⱼᵀ` ([`decouple_with_ports`]).

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::coupling::{CoupledNetwork, CouplingLaw, ExternalLayout, LinearPortRelation};
use crate::error::{PhError, Result};
use crate::linalg;
use crate::system::{LinearPhSystem, PhMatrices, PortHamiltonian, DEFAULT_TOL, FLOW_RCOND_MIN};

/// Absolute tolerance of the port identity check, scaled by `1 + ‖J̃ᵢⱼ − R̃ᵢⱼ‖_max`.
pub const PORT_IDENTITY_TOL: f64 = 1e-12;

/// Block sizes `(n₁, …, nₛ)` of the transformed state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    sizes: Vec<usize>,
}

impl Partition {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(PhError::Partition("no blocks".into()));
        }
        if sizes.contains(&0) {
            return Err(PhError::Partition(format!("empty block in {sizes:?}")));
        }
        Ok(Self { sizes })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }
    pub fn len(&self) -> usize {
        self.sizes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }
    pub fn dim(&self) -> usize {
        self.sizes.iter().sum()
    }
    pub fn ranges(&self) -> Vec<Range<usize>> {
        linalg::ranges(&self.sizes)
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.dim() != n {
            return Err(PhError::Partition(format!(
                "block sizes {:?} sum to {}, system has {} states",
                self.sizes,
                self.dim(),
                n
            )));
        }
        Ok(())
    }
}

/// Invertible linear change of state `w = T x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearTransform {
    matrix: DMatrix<f64>,
    inverse: DMatrix<f64>,
}

impl LinearTransform {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(PhError::dim("transformation", "square", format!("{}x{}", matrix.nrows(), matrix.ncols())));
        }
        let rcond = linalg::rcond(&matrix);
        if rcond <= FLOW_RCOND_MIN {
            return Err(PhError::IllConditioned { rcond });
        }
        let inverse = matrix.clone().try_inverse().ok_or(PhError::IllConditioned { rcond })?;
        Ok(Self { matrix, inverse })
    }

    pub fn identity(n: usize) -> Self {
        Self { matrix: DMatrix::identity(n, n), inverse: DMatrix::identity(n, n) }
    }

    /// Reordering `w[k] = x[order[k]]` (zero-based).
    pub fn permutation(order: &[usize]) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &k in order {
            if k >= n || std::mem::replace(&mut seen[k], true) {
                return Err(PhError::Parameter(format!("{order:?} is not a permutation")));
            }
        }
        let mut t = DMatrix::zeros(n, n);
        for (row, &col) in order.iter().enumerate() {
            t[(row, col)] = 1.0;
        }
        let inverse = t.transpose();
        Ok(Self { matrix: t, inverse })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }
    pub fn forward(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x
    }
    pub fn backward(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.inverse * w
    }
}

/// Transformed system in `w = T x`:
/// `Ẽ = T⁻ᵀ E T⁻¹`, `J̃ − R̃ = T⁻ᵀ (J − R) T⁻¹`, `B̃ = T⁻ᵀ B`,
/// `z̃(w) = T z(T⁻¹ w)`, hence `L̃ = T L T⁻¹` and `H̃(w) = H(T⁻¹ w)`.
pub fn apply_transform(sys: &LinearPhSystem, t: &LinearTransform) -> Result<LinearPhSystem> {
    let n = sys.state_dim();
    if t.matrix.nrows() != n {
        return Err(PhError::dim("transformation", n, t.matrix.nrows()));
    }
    let ti = &t.inverse;
    let tit = ti.transpose();
    let congruence = |a: &DMatrix<f64>| &tit * a * ti;
    let src = sys.matrices_ref();
    let mats = PhMatrices {
        flow: congruence(&src.flow),
        structure: congruence(&src.structure),
        dissipation: congruence(&src.dissipation),
        port: &tit * &src.port,
        port_dissipation: &tit * &src.port_dissipation,
        feedthrough_sym: src.feedthrough_sym.clone(),
        feedthrough_skew: src.feedthrough_skew.clone(),
    };
    LinearPhSystem::from_matrices(mats, &t.matrix * sys.effort_map() * ti)
}

/// Slices of a system along a partition.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockView {
    partition: Partition,
    flow: DMatrix<f64>,
    structure: DMatrix<f64>,
    dissipation: DMatrix<f64>,
    port: DMatrix<f64>,
    effort: DMatrix<f64>,
    energy: DMatrix<f64>,
}

fn block(a: &DMatrix<f64>, r: &Range<usize>, c: &Range<usize>) -> DMatrix<f64> {
    a.view((r.start, c.start), (r.len(), c.len())).into_owned()
}

fn off_blocks(a: &DMatrix<f64>, p: &Partition) -> DMatrix<f64> {
    let mut out = a.clone();
    for r in p.ranges() {
        out.view_mut((r.start, r.start), (r.len(), r.len())).fill(0.0);
    }
    out
}

fn diag_blocks(a: &DMatrix<f64>, p: &Partition) -> DMatrix<f64> {
    a - off_blocks(a, p)
}

fn is_block_diagonal(a: &DMatrix<f64>, p: &Partition) -> bool {
    linalg::max_abs(&off_blocks(a, p)) <= DEFAULT_TOL * (1.0 + linalg::max_abs(a))
}

impl BlockView {
    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    /// `J̃ᵢⱼ`.
    pub fn structure_block(&self, i: usize, j: usize) -> DMatrix<f64> {
        let r = self.partition.ranges();
        block(&self.structure, &r[i], &r[j])
    }
    /// `R̃ᵢⱼ`.
    pub fn dissipation_block(&self, i: usize, j: usize) -> DMatrix<f64> {
        let r = self.partition.ranges();
        block(&self.dissipation, &r[i], &r[j])
    }
    pub fn flow_block(&self, i: usize, j: usize) -> DMatrix<f64> {
        let r = self.partition.ranges();
        block(&self.flow, &r[i], &r[j])
    }
    pub fn effort_block(&self, i: usize, j: usize) -> DMatrix<f64> {
        let r = self.partition.ranges();
        block(&self.effort, &r[i], &r[j])
    }
    /// Rows of `B̃` belonging to block `i`.
    pub fn port_block(&self, i: usize) -> DMatrix<f64> {
        let r = &self.partition.ranges()[i];
        self.port.rows(r.start, r.len()).into_owned()
    }

    pub fn structure_diag(&self) -> DMatrix<f64> {
        diag_blocks(&self.structure, &self.partition)
    }
    pub fn structure_offdiag(&self) -> DMatrix<f64> {
        off_blocks(&self.structure, &self.partition)
    }
    pub fn dissipation_diag(&self) -> DMatrix<f64> {
        diag_blocks(&self.dissipation, &self.partition)
    }
    pub fn dissipation_offdiag(&self) -> DMatrix<f64> {
        off_blocks(&self.dissipation, &self.partition)
    }

    /// `Q̃` block-diagonal, i.e. `H̃(w) = Σ H̃ᵢ(wᵢ)`.
    pub fn hamiltonian_separable(&self) -> bool {
        is_block_diagonal(&self.energy, &self.partition)
    }
    pub fn flow_block_diagonal(&self) -> bool {
        is_block_diagonal(&self.flow, &self.partition)
    }
    /// `z̃ᵢ` depends only on `wᵢ`.
    pub fn effort_block_diagonal(&self) -> bool {
        is_block_diagonal(&self.effort, &self.partition)
    }
    pub fn dissipation_block_diagonal(&self) -> bool {
        is_block_diagonal(&self.dissipation, &self.partition)
    }

    fn require_separable(&self) -> Result<()> {
        let check = |ok: bool, what: &'static str, a: &DMatrix<f64>| {
            if ok {
                Ok(())
            } else {
                Err(PhError::NotSeparable { what, magnitude: linalg::max_abs(&off_blocks(a, &self.partition)) })
            }
        };
        check(self.hamiltonian_separable(), "energy matrix", &self.energy)?;
        check(self.flow_block_diagonal(), "flow matrix", &self.flow)?;
        check(self.effort_block_diagonal(), "effort map", &self.effort)
    }

    fn subsystems(&self) -> Result<Vec<LinearPhSystem>> {
        (0..self.partition.len())
            .map(|i| {
                LinearPhSystem::new(
                    self.flow_block(i, i),
                    self.structure_block(i, i),
                    self.dissipation_block(i, i),
                    self.port_block(i),
                    self.effort_block(i, i),
                )
            })
            .collect()
    }
}

pub fn partition_blocks(sys: &LinearPhSystem, p: &Partition) -> Result<BlockView> {
    p.check(sys.state_dim())?;
    Ok(BlockView {
        partition: p.clone(),
        flow: sys.flow().clone(),
        structure: sys.structure().clone(),
        dissipation: sys.dissipation().clone(),
        port: sys.port().clone(),
        effort: sys.effort_map().clone(),
        energy: sys.energy_matrix().clone(),
    })
}

/// Identity-port decoupling. Without off-diagonal dissipation the coupling
/// is the skew matrix `−J̃_offdiag`; otherwise a relation with `M = I` and
/// `N = −J̃_offdiag + R̃_offdiag`. External inputs are shared by all
/// subsystems.
pub fn decouple_auto(sys: &LinearPhSystem, p: &Partition) -> Result<CoupledNetwork> {
    if !sys.is_special_form() {
        return Err(PhError::NotSpecialForm);
    }
    let view = partition_blocks(sys, p)?;
    view.require_separable()?;
    let subsystems = view.subsystems()?;
    let ports = p.sizes().iter().map(|&k| DMatrix::identity(k, k)).collect();
    let j_off = view.structure_offdiag();
    let law = if view.dissipation_block_diagonal() {
        CouplingLaw::Matrix(-j_off)
    } else {
        let n = sys.state_dim();
        CouplingLaw::Relation(LinearPortRelation::new(DMatrix::identity(n, n), -j_off + view.dissipation_offdiag())?)
    };
    CoupledNetwork::new(subsystems, ports, law, ExternalLayout::Shared)
}

/// One coupling block `Ĉᵢⱼ` supplied to [`decouple_with_ports`].
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingBlock {
    pub i: usize,
    pub j: usize,
    pub matrix: DMatrix<f64>,
}

impl CouplingBlock {
    pub fn new(i: usize, j: usize, matrix: DMatrix<f64>) -> Self {
        Self { i, j, matrix }
    }
}

/// Worst violation of the port identity.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationFailure {
    /// Ordered block pair `(i, j)`, zero-based.
    pub pair: (usize, usize),
    /// `B̂ᵢ Ĉᵢⱼ B̂ⱼᵀ − (−(J̃ᵢⱼ − R̃ᵢⱼ))`.
    pub residual: DMatrix<f64>,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PortDecoupling {
    Verified(CoupledNetwork),
    Failed(VerificationFailure),
}

impl PortDecoupling {
    pub fn network(&self) -> Option<&CoupledNetwork> {
        match self {
            PortDecoupling::Verified(n) => Some(n),
            PortDecoupling::Failed(_) => None,
        }
    }
    pub fn failure(&self) -> Option<&VerificationFailure> {
        match self {
            PortDecoupling::Verified(_) => None,
            PortDecoupling::Failed(f) => Some(f),
        }
    }
}

/// Decoupling with user-chosen internal ports.
///
/// Blocks not supplied are filled in skew form: if only `Ĉᵢⱼ` is given,
/// `Ĉⱼᵢ = −Ĉᵢⱼᵀ`; if neither is given both are zero. Every ordered pair
/// `i ≠ j` is then checked against `J̃ᵢⱼ − R̃ᵢⱼ = −B̂ᵢ Ĉᵢⱼ B̂ⱼᵀ`. The skew
/// part of the assembled `Ĉ` reproduces the off-diagonal structure and its
/// symmetric part the off-diagonal dissipation.
pub fn decouple_with_ports(
    sys: &LinearPhSystem,
    p: &Partition,
    ports: Vec<DMatrix<f64>>,
    blocks: &[CouplingBlock],
) -> Result<PortDecoupling> {
    if !sys.is_special_form() {
        return Err(PhError::NotSpecialForm);
    }
    let view = partition_blocks(sys, p)?;
    let s = p.len();
    if ports.len() != s {
        return Err(PhError::dim("port matrix list", s, ports.len()));
    }
    for (i, (b, &ni)) in ports.iter().zip(p.sizes()).enumerate() {
        if b.nrows() != ni {
            return Err(PhError::dim(format!("port matrix {i} (rows)"), ni, b.nrows()));
        }
    }
    let widths: Vec<usize> = ports.iter().map(|b| b.ncols()).collect();
    let mut given: Vec<Vec<Option<DMatrix<f64>>>> = vec![vec![None; s]; s];
    for blk in blocks {
        if blk.i >= s || blk.j >= s || blk.i == blk.j {
            return Err(PhError::Parameter(format!("invalid coupling block index ({}, {})", blk.i, blk.j)));
        }
        if blk.matrix.shape() != (widths[blk.i], widths[blk.j]) {
            return Err(PhError::dim(
                format!("coupling block ({}, {})", blk.i, blk.j),
                format!("{}x{}", widths[blk.i], widths[blk.j]),
                format!("{}x{}", blk.matrix.nrows(), blk.matrix.ncols()),
            ));
        }
        given[blk.i][blk.j] = Some(blk.matrix.clone());
    }
    view.require_separable()?;

    let total: usize = widths.iter().sum();
    let wr = linalg::ranges(&widths);
    let mut c = DMatrix::zeros(total, total);
    let mut worst: Option<VerificationFailure> = None;
    for i in 0..s {
        for j in 0..s {
            if i == j {
                continue;
            }
            let cij = match (&given[i][j], &given[j][i]) {
                (Some(m), _) => m.clone(),
                (None, Some(m)) => -m.transpose(),
                (None, None) => DMatrix::zeros(widths[i], widths[j]),
            };
            let target = view.structure_block(i, j) - view.dissipation_block(i, j);
            let residual = &ports[i] * &cij * ports[j].transpose() + &target;
            let max_residual = linalg::max_abs(&residual);
            let failed = max_residual > PORT_IDENTITY_TOL * (linalg::max_abs(&target) + 1.0);
            if failed && worst.as_ref().is_none_or(|w| max_residual > w.max_residual) {
                worst = Some(VerificationFailure { pair: (i, j), residual, max_residual });
            }
            c.view_mut((wr[i].start, wr[j].start), (widths[i], widths[j])).copy_from(&cij);
        }
    }
    if let Some(f) = worst {
        return Ok(PortDecoupling::Failed(f));
    }
    let net = CoupledNetwork::new(view.subsystems()?, ports, CouplingLaw::Matrix(c), ExternalLayout::Shared)?;
    Ok(PortDecoupling::Verified(net))
}

/// Largest mixed second derivative `∂²H̃/∂wₐ∂w_b` across different blocks,
/// estimated by central differences at the sample points, where
/// `H̃(w) = H(F⁻¹(w))`. Zero (up to differencing error) iff `H̃` is
/// separable along `p` on the sampled region. Works for nonlinear maps.
pub fn separability_defect(
    hamiltonian: impl Fn(&DVector<f64>) -> f64,
    inverse_map: impl Fn(&DVector<f64>) -> DVector<f64>,
    p: &Partition,
    samples: &[DVector<f64>],
) -> Result<f64> {
    let n = p.dim();
    let h_tilde = |w: &DVector<f64>| hamiltonian(&inverse_map(w));
    let ranges = p.ranges();
    let owner: Vec<usize> = (0..n).map(|k| ranges.iter().position(|r| r.contains(&k)).unwrap()).collect();
    let mut worst = 0.0_f64;
    for w in samples {
        if w.len() != n {
            return Err(PhError::dim("sample state", n, w.len()));
        }
        let h = f64::EPSILON.powf(0.25) * (1.0 + w.norm());
        for a in 0..n {
            for b in (a + 1)..n {
                if owner[a] == owner[b] {
                    continue;
                }
                let eval = |sa: f64, sb: f64| {
                    let mut v = w.clone();
                    v[a] += sa * h;
                    v[b] += sb * h;
                    h_tilde(&v)
                };
                let d = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0)) / (4.0 * h * h);
                worst = worst.max(d.abs());
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::condense_skew;

    fn sample_system() -> LinearPhSystem {
        // 3 states, coupled through J only.
        LinearPhSystem::explicit(
            DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.5, -1.0, 0.0, 2.0, -0.5, -2.0, 0.0]),
            DMatrix::from_diagonal(&DVector::from_vec(vec![0.2, 0.0, 0.3])),
            DMatrix::from_row_slice(3, 1, &[1.0, 0.0, 1.0]),
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0])),
        )
        .unwrap()
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::new(vec![]).is_err());
        assert!(Partition::new(vec![2, 0]).is_err());
        let p = Partition::new(vec![2, 2]).unwrap();
        assert!(matches!(partition_blocks(&sample_system(), &p), Err(PhError::Partition(_))));
    }

    #[test]
    fn single_block_has_empty_offdiag() {
        let sys = sample_system();
        let v = partition_blocks(&sys, &Partition::new(vec![3]).unwrap()).unwrap();
        assert_eq!(v.structure_offdiag(), DMatrix::zeros(3, 3));
        assert_eq!(&v.structure_diag(), sys.structure());
        assert_eq!(&v.dissipation_diag(), sys.dissipation());
    }

    #[test]
    fn block_view_reassembles() {
        let sys = sample_system();
        let v = partition_blocks(&sys, &Partition::new(vec![1, 2]).unwrap()).unwrap();
        assert_eq!(&(v.structure_diag() + v.structure_offdiag()), sys.structure());
        assert_eq!(&(v.dissipation_diag() + v.dissipation_offdiag()), sys.dissipation());
        assert_eq!(v.structure_block(0, 1), DMatrix::from_row_slice(1, 2, &[1.0, 0.5]));
    }

    #[test]
    fn identity_transform_is_a_no_op() {
        let sys = sample_system();
        assert_eq!(apply_transform(&sys, &LinearTransform::identity(3)).unwrap(), sys);
    }

    #[test]
    fn singular_transform_rejected() {
        let t = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(LinearTransform::new(t), Err(PhError::IllConditioned { .. })));
        assert!(LinearTransform::permutation(&[0, 0, 1]).is_err());
    }

    #[test]
    fn transform_preserves_energy_and_output() {
        let sys = sample_system();
        let t = LinearTransform::new(DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.5, 1.0, 0.0, 0.0, -1.0, 3.0]))
            .unwrap();
        let ts = apply_transform(&sys, &t).unwrap();
        assert!(crate::validate_structure(&ts, &[], 1e-10).unwrap().passed());
        let x = DVector::from_vec(vec![0.3, -1.2, 0.7]);
        let w = t.forward(&x);
        assert!((sys.hamiltonian(&x) - ts.hamiltonian(&w)).abs() < 1e-14);
        let u = DVector::from_vec(vec![0.4]);
        assert!((sys.output(&x, &u) - ts.output(&w, &u)).norm() < 1e-14);
        // ẇ = T ẋ
        let dx = crate::eval_dynamics(&sys, &x, &u).unwrap().xdot;
        let dw = crate::eval_dynamics(&ts, &w, &u).unwrap().xdot;
        assert!((t.forward(&dx) - dw).norm() < 1e-13);
    }

    #[test]
    fn case_one_roundtrip_and_skewness() {
        let sys = sample_system();
        let p = Partition::new(vec![1, 2]).unwrap();
        let net = decouple_auto(&sys, &p).unwrap();
        let CouplingLaw::Matrix(c) = net.law() else { panic!("expected Case 1") };
        assert_eq!(linalg::skew_violation(c), 0.0);
        let back = condense_skew(&net).unwrap();
        assert_eq!(back.structure(), sys.structure());
        assert_eq!(back.dissipation(), sys.dissipation());
        assert_eq!(back.port(), sys.port());
        assert_eq!(back.energy_matrix(), sys.energy_matrix());
    }

    #[test]
    fn block_diagonal_system_gives_zero_coupling() {
        let sys = LinearPhSystem::explicit(
            DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            DMatrix::identity(3, 3),
            DMatrix::zeros(3, 0),
            DMatrix::identity(3, 3),
        )
        .unwrap();
        let net = decouple_auto(&sys, &Partition::new(vec![2, 1]).unwrap()).unwrap();
        assert_eq!(net.law(), &CouplingLaw::Matrix(DMatrix::zeros(3, 3)));
    }

    #[test]
    fn case_two_dissipative_offdiag() {
        let sys = LinearPhSystem::explicit(
            DMatrix::zeros(2, 2),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]),
            DMatrix::zeros(2, 0),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let net = decouple_auto(&sys, &Partition::new(vec![1, 1]).unwrap()).unwrap();
        let CouplingLaw::Relation(rel) = net.law() else { panic!("expected Case 2") };
        assert_eq!(rel.input_coeff(), &DMatrix::identity(2, 2));
        assert_eq!(rel.output_coeff(), &DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]));
        let back = net.condense().unwrap().into_system().unwrap();
        assert_eq!(back.dissipation(), sys.dissipation());
        assert_eq!(back.structure(), sys.structure());
    }

    #[test]
    fn non_separable_energy_rejected() {
        let sys = LinearPhSystem::explicit(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 0),
            DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]),
        )
        .unwrap();
        let err = decouple_auto(&sys, &Partition::new(vec![1, 1]).unwrap()).unwrap_err();
        assert!(matches!(err, PhError::NotSeparable { what: "energy matrix", .. }));
        // a rotation that diagonalises Q makes it separable
        let s = 0.5_f64.sqrt();
        let t = LinearTransform::new(DMatrix::from_row_slice(2, 2, &[s, s, -s, s])).unwrap();
        let ts = apply_transform(&sys, &t).unwrap();
        assert!(decouple_auto(&ts, &Partition::new(vec![1, 1]).unwrap()).is_ok());
    }

    #[test]
    fn universal_fallback_always_verifies() {
        let sys = LinearPhSystem::explicit(
            DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.5, -1.0, 0.0, 2.0, -0.5, -2.0, 0.0]),
            DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 1.0, 0.1, 0.0, 0.1, 1.0]),
            DMatrix::zeros(3, 0),
            DMatrix::identity(3, 3),
        )
        .unwrap();
        let p = Partition::new(vec![1, 2]).unwrap();
        let v = partition_blocks(&sys, &p).unwrap();
        let blocks: Vec<_> = [(0, 1), (1, 0)]
            .iter()
            .map(|&(i, j)| CouplingBlock::new(i, j, -(v.structure_block(i, j) - v.dissipation_block(i, j))))
            .collect();
        let out =
            decouple_with_ports(&sys, &p, vec![DMatrix::identity(1, 1), DMatrix::identity(2, 2)], &blocks).unwrap();
        let net = out.network().expect("fallback verifies");
        let back = net.condense().unwrap().into_system().unwrap();
        assert!(linalg::max_abs(&(back.structure() - sys.structure())) < 1e-15);
        assert!(linalg::max_abs(&(back.dissipation() - sys.dissipation())) < 1e-15);
    }

    #[test]
    fn port_matrix_dimension_errors() {
        let sys = sample_system();
        let p = Partition::new(vec![1, 2]).unwrap();
        let err = decouple_with_ports(&sys, &p, vec![DMatrix::identity(2, 2), DMatrix::identity(2, 2)], &[]);
        assert!(matches!(err, Err(PhError::Dimension { .. })));
        let err = decouple_with_ports(
            &sys,
            &p,
            vec![DMatrix::identity(1, 1), DMatrix::identity(2, 2)],
            &[CouplingBlock::new(0, 1, DMatrix::zeros(1, 1))],
        );
        assert!(matches!(err, Err(PhError::Dimension { .. })));
    }

    #[test]
    fn separability_defect_detects_cross_terms() {
        let p = Partition::new(vec![1, 1]).unwrap();
        let samples = vec![DVector::from_vec(vec![0.3, -0.2]), DVector::from_vec(vec![1.0, 0.5])];
        let sep = |x: &DVector<f64>| x[0].powi(4) + x[1].cosh();
        assert!(separability_defect(sep, |w| w.clone(), &p, &samples).unwrap() < 1e-6);
        let coupled = |x: &DVector<f64>| x[0] * x[0] + x[0] * x[1] + x[1] * x[1];
        let d = separability_defect(coupled, |w| w.clone(), &p, &samples).unwrap();
        assert!((d - 1.0).abs() < 1e-6, "{d}");
        // the same coupled energy becomes separable after rotating by 45°
        let s = 0.5_f64.sqrt();
        let inv = move |w: &DVector<f64>| DVector::from_vec(vec![s * (w[0] - w[1]), s * (w[0] + w[1])]);
        assert!(separability_defect(coupled, inv, &p, &samples).unwrap() < 1e-6);
    }
}
