use alloc::string::String;
use alloc::vec::Vec;

/// Crate-wide result alias.
pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Everything that can go wrong while checking, assembling or solving.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Caller broke an interface contract (mismatched dimensions, bad sizes).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Invalid discretization or run configuration.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// A coefficient or datum produced a non-finite value.
    #[error("non-finite {what} at {location:?}")]
    Data {
        /// Which field misbehaved.
        what: String,
        /// Point where it was sampled.
        location: Vec<f64>,
    },

    /// A structural hypothesis of the problem class does not hold.
    #[error("hypothesis violated at {point:?}: {reason}")]
    Hypothesis {
        /// What failed.
        reason: String,
        /// Witness point (empty when not pointwise).
        point: Vec<f64>,
    },

    /// `P` is not comparable to `Q`.
    #[error("P is not comparable to Q at {point:?}: {reason}")]
    NotComparable {
        /// Why comparability failed.
        reason: String,
        /// Witness point.
        point: Vec<f64>,
    },

    /// The exponents violate `q > 2σ'`.
    #[error("exponent hypothesis violated: q = {q} must exceed 2σ' = {bound} (σ = {sigma})")]
    Exponent {
        /// Integrability exponent of the coefficients.
        q: f64,
        /// Sobolev gain.
        sigma: f64,
        /// The threshold `2σ/(σ-1)`.
        bound: f64,
    },

    /// A factorization hit a zero pivot.
    #[error("matrix is numerically singular (pivot {pivot} at row {row})")]
    Singular {
        /// Row of the failing pivot.
        row: usize,
        /// Pivot magnitude.
        pivot: f64,
    },

    /// Iterative solver did not converge.
    #[error("solver failure: {0}")]
    SolverFailure(String),

    /// The shift certificate could not be obtained.
    #[error("unsolvable configuration: shifted form not coercive after {doublings} doublings (p = {p}, λ_min = {lambda_min})")]
    Unsolvable {
        /// Last shift tried.
        p: f64,
        /// Last minimum generalized eigenvalue.
        lambda_min: f64,
        /// Number of doublings performed.
        doublings: u32,
    },

    /// An internal invariant failed; indicates inconsistent inputs such as a bad `C1`.
    #[error("internal consistency: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn hypothesis(reason: impl Into<String>, point: &[f64]) -> Self {
        Error::Hypothesis {
            reason: reason.into(),
            point: point.to_vec(),
        }
    }
}
