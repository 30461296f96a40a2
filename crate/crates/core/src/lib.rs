//! Port-Hamiltonian systems: validation, interconnection, decomposition and
//! structure-preserving time integration.
//!
//! A system has the form
//!
//! ```text
//! E ẋ = (J − R) z + (B − P) u
//!   y = (B + P)ᵀ z + (S − N) u
//! ```
//!
//! with `[[J, B], [−Bᵀ, N]]` skew, `[[R, P], [Pᵀ, S]]` positive semidefinite
//! and `∇H = Eᵀ z`. Linear systems use `z = L x` and `H = ½ xᵀ EᵀL x`.
//!
//! ```
//! use nalgebra::{DMatrix, DVector};
//! use phnet::{implicit_midpoint, zero_input, LinearPhSystem};
//!
//! let sys = LinearPhSystem::explicit(
//!     DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
//!     DMatrix::zeros(2, 2),
//!     DMatrix::zeros(2, 0),
//!     DMatrix::identity(2, 2),
//! )
//! .unwrap();
//! let x0 = DVector::from_vec(vec![1.0, 0.0]);
//! let traj = implicit_midpoint(&sys, &zero_input(0), &x0, 0.0, 1.0, 0.1).unwrap();
//! assert!((traj.energy()[10] - 0.5).abs() < 1e-14);
//! ```

pub mod coupling;
pub mod decoupling;
pub mod error;
pub mod integrate;
pub mod linalg;
pub mod models;
pub mod system;

pub use coupling::{
    build_phdae, condense_general, condense_skew, eliminate_ports, Condensation, CoupledNetwork, CouplingLaw,
    ExternalLayout, LinearPortRelation, PhdaeSystem,
};
pub use decoupling::{
    apply_transform, decouple_auto, decouple_with_ports, partition_blocks, separability_defect, BlockView,
    CouplingBlock, LinearTransform, Partition, PortDecoupling, VerificationFailure,
};
pub use error::{PhError, Result};
pub use integrate::{
    constant_input, dynamic_iteration, energy_report, implicit_midpoint, strang_split, time_grid, zero_input,
    DynamicIteration, EnergyReport, InnerSolver, IterationMode, Method, Signal, Trajectory,
};
pub use system::{
    eval_dynamics, fd_gradient, power_balance_residual, validate_structure, CallbackPhSystem, Dynamics, LinearPhSystem,
    PhMatrices, PortHamiltonian, StructureReport, DEFAULT_TOL,
};

pub use nalgebra;
