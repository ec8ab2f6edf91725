//! Crate-wide error type.
//!
//! Every fallible operation in the crate returns [`Error`]. Variants are
//! grouped by the layer that raises them; the CLI maps them onto process
//! exit codes (config errors -> 2, everything else -> 3).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Curvature of a requested boundary is not strictly positive.
    #[error("convexity violation: {0}")]
    ConvexityViolation(String),

    /// A constructor argument is outside its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The support function <x - x0, nu> is not positive everywhere;
    /// the base point is not strictly interior or the boundary is not convex.
    #[error("non-positive support function: {0}")]
    NonPositiveSupport(String),

    /// An iterative root search or refinement failed to bracket/converge.
    #[error("convergence failure: {0}")]
    ConvergenceFailure(String),

    /// Two objects built for different domains were combined.
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    /// A matrix factorization could not be carried out reliably.
    #[error("ill-conditioned system: {0}")]
    IllConditioned(String),

    /// Eigenvalue count over a scan window disagrees with the two-term
    /// counting estimate by more than the allowed margin.
    #[error("missed eigenvalue suspected: {0}")]
    MissedEigenvalueSuspected(String),

    /// Interior quadrature of |u|^2 was not positive; the candidate mode
    /// carries no mass inside the domain.
    #[error("normalization failure: {0}")]
    NormalizationFailure(String),

    /// A flux density sample was negative.
    #[error("negative density: {0}")]
    NegativeDensity(String),

    /// Sample vectors do not match the grid they are paired with.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A correlation was requested against a weight without a certified
    /// vanishing mean.
    #[error("weight mean not zero: {0}")]
    MeanNotZero(String),

    /// Moment projection annihilated the input.
    #[error("degenerate weight: {0}")]
    DegenerateWeight(String),

    /// The computed spectrum does not reach the requested index or cutoff.
    #[error("spectrum too short: {0}")]
    SpectrumTooShort(String),

    /// A regression was requested on data with no spread.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// The experiment configuration failed validation.
    #[error("config error: {0}")]
    ConfigError(String),

    /// A subcommand needs an artifact that an earlier stage has not written.
    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors that indicate a bad experiment description rather
    /// than a computation problem.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::ConfigError(_) | Error::InvalidParameter(_))
    }
}
