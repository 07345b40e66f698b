//! Command implementation behind the `fermi-gig` binary, exposed as a
//! library so integration tests can drive the same code paths the
//! executable runs.

pub mod config;
pub mod report;
pub mod suites;
