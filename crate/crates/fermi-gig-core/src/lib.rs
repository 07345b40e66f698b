//! Gauge-invariant Gaussian fermionic states and channels on finite CAR
//! algebras: Fock representations with Jordan–Wigner fields, symbol calculus
//! for gauge-invariant states, dilation-built gauge-covariant channels and
//! their classification, quasi-free semigroups with explicit generators, and
//! conditional expectations with recovery maps.

pub mod car;
pub mod channels;
pub mod cmatrix;
pub mod condexp;
pub mod config;
pub mod error;
pub mod gig;
pub mod linalg;
pub mod rng;
pub mod sampling;
pub mod semigroups;

pub use cmatrix::CMatrix;
pub use error::{Error, Result};
