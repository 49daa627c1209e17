//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the numerical kernels and process operations.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A series or iteration failed to reach the requested accuracy
    /// within its evaluation budget.
    #[error("non-convergence: {0}")]
    NonConvergence(String),

    /// Cancellation destroyed all significant digits; the caller should
    /// reduce the order or switch representation.
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    /// Adaptive quadrature could not meet its tolerance within budget.
    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),

    /// Two birth rates coincide exactly; the partial-fraction form is
    /// undefined.
    #[error("duplicate rates: lambda_{0} == lambda_{1} == {2}")]
    DuplicateRates(usize, usize, f64),

    /// A birth rate is zero, negative or non-finite.
    #[error("non-positive rate: lambda_{0} = {1}")]
    NonPositiveRate(usize, f64),

    /// A pairwise rate difference underflowed to zero during the
    /// partial-fraction computation.
    #[error("degenerate rates: {0}")]
    DegenerateRates(String),

    /// Index beyond the stored prefix of an explicit rate schedule.
    #[error("index out of range: k={k} exceeds stored prefix of length {len}")]
    IndexOutOfRange { k: usize, len: usize },

    /// A simulation run needed rates beyond the validated explicit prefix.
    #[error("prefix exhausted: simulation reached state {0} beyond the explicit schedule")]
    PrefixExhausted(usize),

    /// A single run exceeded the event-count guard.
    #[error("explosion guard tripped after {0} events")]
    ExplosionGuard(u64),

    /// The PMF table hit its hard cap before reaching the tail tolerance.
    #[error("truncation failure: running mass {mass} below target after {k_cut} states")]
    TruncationFailure { k_cut: usize, mass: f64 },

    /// Chi-square pooling left fewer than two bins.
    #[error("degenerate binning: {0} bins after pooling")]
    DegenerateBinning(usize),

    /// The random-time law is a point mass and has no density.
    #[error("degenerate point mass: no density exists at nu = 1")]
    PointMass,
}

pub type Result<T> = std::result::Result<T, Error>;
