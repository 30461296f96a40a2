//! Command-line front end for `phnet`.
//!
//! Systems and networks are exchanged as JSON documents ([`document`]),
//! trajectories as CSV tables ([`table`]). [`app::run`] parses arguments
//! and maps failures to exit codes ([`error`]).

pub mod app;
pub mod document;
pub mod error;
pub mod table;

pub use error::Failure;
