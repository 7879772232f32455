use thiserror::Error;

/// Errors raised by the numerical routines and model constructors.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular pencil: E is not invertible (reciprocal condition {rcond:.3e})")]
    SingularPencil { rcond: f64 },

    #[error("pole at evaluation point s = {re}{im:+}j")]
    PoleAtEvaluation { re: f64, im: f64 },

    #[error("gain is not real-valued: |Im K| = {imag_norm:.3e} exceeds tolerance {tolerance:.3e}")]
    NotRealValued { imag_norm: f64, tolerance: f64 },

    #[error("{what} is near-singular (reciprocal condition {rcond:.3e}); requires A^-1 to exist")]
    NearSingular { what: String, rcond: f64 },

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("invalid rate: {0}")]
    InvalidRate(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),

    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),

    #[error("invalid Laplacian: {0}")]
    InvalidLaplacian(String),

    #[error("descriptor not reducible: E is singular (reciprocal condition {rcond:.3e})")]
    DescriptorNotReducible { rcond: f64 },

    #[error("standing assumption violated at omega = {omega}: {detail}")]
    StandingAssumption { omega: f64, detail: String },

    #[error("closed loop is not stable: {0}")]
    NotStable(String),

    #[error("no feasible gamma below {limit:e}: system is unstabilizable or degenerate")]
    Unstabilizable { limit: f64 },

    #[error("internal numerical failure: {0}")]
    Internal(String),
}

impl Error {
    /// True for errors that describe a violated model condition (as opposed
    /// to a numerical failure inside an algorithm).
    pub fn is_invariant_violation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::Dimension(_)
                | Error::NearSingular { .. }
                | Error::RankDeficient(_)
                | Error::InvalidRate(_)
                | Error::InvalidParameter(_)
                | Error::HypothesisViolation(_)
                | Error::DuplicateEdge(..)
                | Error::InvalidLaplacian(_)
                | Error::DescriptorNotReducible { .. }
                | Error::SingularPencil { .. }
                | Error::StandingAssumption { .. }
                | Error::NotRealValued { .. }
                | Error::PoleAtEvaluation { .. }
                | Error::Unstabilizable { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
