use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian (asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("iteration budget exhausted in {0}")]
    NoConvergence(&'static str),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("state is not normalized (norm {0:.12})")]
    NotNormalized(f64),

    #[error("reduced states have zero fidelity")]
    ZeroFidelity,

    #[error("operator is not a partial isometry (defect {0:.3e})")]
    NotPartialIsometry(f64),

    #[error("operator is not unitary (defect {0:.3e})")]
    NotUnitary(f64),

    #[error("instance is not in the X = Y = 1 frame (deviation {0:.3e})")]
    FrameMismatch(f64),

    #[error("oblique projection leaks outside Image(rho) by {0:.3e}")]
    IllConditioned(f64),

    #[error("bad parameters: {0}")]
    BadParams(String),

    #[error("matrix is not invertible (min eigenvalue {0:.3e})")]
    NotInvertible(f64),

    #[error("epsilon {epsilon} exceeds the admissible maximum {max}")]
    EpsilonTooLarge { epsilon: f64, max: f64 },

    #[error("spectral projection is empty")]
    DegenerateProjection,

    #[error("invalid group: {0}")]
    InvalidGroup(String),

    #[error("invalid file format: {0}")]
    InvalidFormat(String),

    #[error("non-finite value at {0}")]
    NonFinite(String),

    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),
}

impl Error {
    /// True for errors caused by bad inputs rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::NotHermitian(_)
                | Error::DimensionMismatch(_)
                | Error::NotNormalized(_)
                | Error::NotPartialIsometry(_)
                | Error::NotUnitary(_)
                | Error::FrameMismatch(_)
                | Error::BadParams(_)
                | Error::NotInvertible(_)
                | Error::EpsilonTooLarge { .. }
                | Error::InvalidGroup(_)
                | Error::InvalidFormat(_)
                | Error::NonFinite(_)
                | Error::ZeroFidelity
        )
    }

    /// Short machine-readable identifier.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotHermitian(_) => "NotHermitian",
            Error::NoConvergence(_) => "NoConvergence",
            Error::NotPsd(_) => "NotPsd",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::NotNormalized(_) => "NotNormalized",
            Error::ZeroFidelity => "ZeroFidelity",
            Error::NotPartialIsometry(_) => "NotPartialIsometry",
            Error::NotUnitary(_) => "NotUnitary",
            Error::FrameMismatch(_) => "FrameMismatch",
            Error::IllConditioned(_) => "IllConditioned",
            Error::BadParams(_) => "BadParams",
            Error::NotInvertible(_) => "NotInvertible",
            Error::EpsilonTooLarge { .. } => "EpsilonTooLarge",
            Error::DegenerateProjection => "DegenerateProjection",
            Error::InvalidGroup(_) => "InvalidGroup",
            Error::InvalidFormat(_) => "InvalidFormat",
            Error::NonFinite(_) => "NonFinite",
            Error::Inconsistent(_) => "Inconsistent",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
