use thiserror::Error;

/// Error surface for the whole library. Variants carry enough context to
/// report the violated precondition without re-deriving it.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (residual {residual:.3e})")]
    NonHermitian { residual: f64 },
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:.3e})")]
    NotPsd { min_eig: f64 },
    #[error("logarithm of a singular positive matrix")]
    LogOfSingular,
    #[error("spectral radius {radius:.6} is within {margin:.1e} of one")]
    SpectralRadiusAtOne { radius: f64, margin: f64 },
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("mode count {n} outside supported range 1..={max}")]
    SizeOutOfRange { n: usize, max: usize },
    #[error("matrix is not unitary (residual {residual:.3e})")]
    NotUnitary { residual: f64 },
    #[error("no intertwining unitary exists")]
    IntertwinerNotFound,
    #[error("map is not injective (smallest singular value {sigma_min:.3e})")]
    NotInjective { sigma_min: f64 },
    #[error("symbol has an eigenvalue on the boundary of [0,1]")]
    SymbolOnBoundary,
    #[error("symbol eigenvalues outside [0,1]: min {min_eig:.3e}, max {max_eig:.3e}")]
    InvalidSymbol { min_eig: f64, max_eig: f64 },
    #[error("incompatible channel pair: {context}")]
    IncompatiblePair { context: String },
    #[error("invalid POVM element: {context}")]
    InvalidPovm { context: String },
    #[error("symbol difference is not rank one (second singular value {sigma2:.3e})")]
    NotRankOneGap { sigma2: f64 },
    #[error("no classification branch is consistent (best residual {residual:.3e})")]
    NoConsistentBranch { residual: f64 },
    #[error("invalid semigroup parameters: {context}")]
    InvalidParams { context: String },
    #[error("operators do not commute (residual {residual:.3e})")]
    NonCommuting { residual: f64 },
    #[error("kernel containment violated (residual {residual:.3e})")]
    KernelMismatch { residual: f64 },
    #[error("powers of the contraction do not converge")]
    PowersDoNotConverge,
    #[error("negative weight {weight}")]
    NegativeWeight { weight: f64 },
    #[error("subspace is not invariant under the symbol (residual {residual:.3e})")]
    SubspaceNotInvariant { residual: f64 },
    #[error("state is singular (min eigenvalue {min_eig:.3e})")]
    SingularState { min_eig: f64 },
    #[error("restricted state is singular (min eigenvalue {min_eig:.3e})")]
    SingularRestriction { min_eig: f64 },
    #[error("not a state (normalized trace {trace:.6})")]
    NotAState { trace: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn dim(context: impl Into<String>) -> Self {
        Error::DimensionMismatch { context: context.into() }
    }
}
