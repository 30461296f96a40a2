use std::fmt;

use phnet::PhError;

/// Usage, unreadable input or an unsupported option.
pub const EXIT_USAGE: u8 = 1;
/// The input parsed but violates the port-Hamiltonian structure.
pub const EXIT_VALIDATION: u8 = 2;
/// A user-supplied port decoupling does not reproduce the system.
pub const EXIT_VERIFICATION: u8 = 3;
/// A linear solve or Newton iteration failed.
pub const EXIT_NUMERICAL: u8 = 4;

/// Error carrying the process exit code it maps to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(EXIT_USAGE, message)
    }
    /// Malformed documents are usage errors.
    pub fn input(message: impl Into<String>) -> Self {
        Self::new(EXIT_USAGE, message)
    }
    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(EXIT_VALIDATION, message)
    }
    pub fn verification(message: impl Into<String>) -> Self {
        Self::new(EXIT_VERIFICATION, message)
    }
    pub fn numerical(message: impl Into<String>) -> Self {
        Self::new(EXIT_NUMERICAL, message)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

impl From<PhError> for Failure {
    fn from(e: PhError) -> Self {
        let code = match &e {
            PhError::SingularFlow { .. }
            | PhError::SingularStep
            | PhError::NewtonDivergence { .. }
            | PhError::IllConditioned { .. }
            | PhError::NotEliminable => EXIT_NUMERICAL,
            PhError::InvalidSubsystem { .. }
            | PhError::NotSeparable { .. }
            | PhError::NonSkewCoupling { .. }
            | PhError::NotSpecialForm
            | PhError::Dimension { .. } => EXIT_VALIDATION,
            PhError::Partition(_) | PhError::TimeGrid(_) | PhError::Parameter(_) => EXIT_USAGE,
        };
        Self::new(code, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::usage(e.to_string())
    }
}
