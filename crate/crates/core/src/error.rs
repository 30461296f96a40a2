use thiserror::Error;

/// Errors raised by the construction, coupling and integration routines.
///
/// Failed structural *checks* are not errors: they are reported through
/// [`StructureReport`](crate::StructureReport) or the tagged outcomes of the
/// coupling and decoupling operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension { context: String, expected: String, found: String },

    #[error("descriptor system: integrate unsupported (flow matrix reciprocal condition {rcond:.3e})")]
    SingularFlow { rcond: f64 },

    #[error("coupling matrix is not skew-symmetric (violation {violation:.3e}); use condense_general")]
    NonSkewCoupling { violation: f64 },

    #[error("general relation not eliminable: input coefficient matrix is singular")]
    NotEliminable,

    #[error("{what} is not block-diagonal with respect to the partition (off-block magnitude {magnitude:.3e}); Hamiltonian/flow not separable")]
    NotSeparable { what: &'static str, magnitude: f64 },

    #[error("invalid partition: {0}")]
    Partition(String),

    #[error("transformation is ill-conditioned (reciprocal condition {rcond:.3e})")]
    IllConditioned { rcond: f64 },

    #[error("subsystem {index} fails structural validation")]
    InvalidSubsystem { index: usize },

    #[error("decoupling requires the special form (no port dissipation or feed-through)")]
    NotSpecialForm,

    #[error("step matrix is singular")]
    SingularStep,

    #[error("Newton iteration did not converge after {iterations} iterations (update norm {update:.3e})")]
    NewtonDivergence { iterations: usize, update: f64 },

    #[error("invalid time grid: {0}")]
    TimeGrid(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),
}

impl PhError {
    pub(crate) fn dim(context: impl Into<String>, expected: impl ToString, found: impl ToString) -> Self {
        PhError::Dimension { context: context.into(), expected: expected.to_string(), found: found.to_string() }
    }
}

pub type Result<T> = std::result::Result<T, PhError>;
