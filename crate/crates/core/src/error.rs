use thiserror::Error;

/// Every failure the library reports. Validation problems and numerical
/// failures are kept apart so front ends can map them to exit codes.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("endpoint count must be even and at least 2, got {0}")]
    OddCount(usize),
    #[error("endpoints must be strictly increasing (violated at index {0})")]
    NotSorted(usize),
    #[error("endpoints {0} and {1} are closer than the coincidence tolerance")]
    EndpointsCoincide(usize, usize),
    #[error("0 must not be an endpoint (index {0})")]
    ZeroOnBoundary(usize),
    #[error("0 must lie strictly inside one band")]
    ZeroOutsideBands,
    #[error("endpoint {0} is not finite")]
    NonFiniteEndpoint(usize),
    #[error("alpha must exceed -1/2, got {0}")]
    AlphaOutOfRange(f64),
    #[error("invalid index {index} for {what} (count {count})")]
    BadIndex {
        what: &'static str,
        index: usize,
        count: usize,
    },

    #[error("quadrature order {0} is below the minimum 4")]
    OrderTooSmall(usize),
    #[error("integrand returned a non-finite value at {0}")]
    NonFinite(f64),
    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),

    #[error("cycle matrix is singular")]
    SingularCycleMatrix,
    #[error("reduced cycle matrix is singular")]
    SingularTildeA,
    #[error("no sign change found on ({0}, {1})")]
    ZeroNotBracketed(f64, f64),
    #[error("frequency {0} is not positive ({1})")]
    NonPositiveFrequency(usize, f64),
    #[error("period matrix asymmetry {0:e} exceeds tolerance")]
    AsymmetryExceedsTolerance(f64),
    #[error("imaginary part of the period matrix is not positive definite")]
    PeriodMatrixNotPositive,
    #[error("A(inf)+d is not a lattice point (defect {0:e})")]
    LatticeRelationViolated(f64),

    #[error("theta truncation cannot reach tolerance {0:e} within the radius limit")]
    TruncationBoundExceeded(f64),
    #[error("operation requires genus 1, got {0}")]
    WrongGenus(usize),

    #[error("quantity expected real has imaginary residue {0:e}")]
    NonRealResidue(f64),
    #[error("quantity expected imaginary has real residue {0:e}")]
    NonImaginaryResidue(f64),

    #[error("theta vanishes in a denominator")]
    ThetaZeroInDenominator,
    #[error("mode n1 requires genus 1, got {0}")]
    ModeRequiresGenusOne(usize),
    #[error("integral did not converge: {0}")]
    IntegralNonConvergent(String),
    #[error("time average not converged (estimate {estimate}, change {change:e})")]
    NonConvergent { estimate: f64, change: f64 },

    #[error("Kummer parameter b={0} is a pole")]
    PoleOfB(f64),
    #[error("argument outside the supported range: {0}")]
    RangeExceeded(String),
    #[error("self-check failed: {0}")]
    SelfCheckFailed(String),
    #[error("kernel with explicit |x|^alpha factor evaluated at the origin")]
    OriginEvaluation,
    #[error("Barnes G argument {0} is a pole of the recurrence")]
    PoleHit(String),
    #[error("Nystrom determinant not converged: change {0:e} on doubling")]
    NotConverged(f64),
    #[error("Nystrom matrix is not positive definite")]
    NotPositiveDefinite,
}

impl Error {
    /// True for configuration and input problems (as opposed to numerical failures).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::OddCount(_)
                | Error::NotSorted(_)
                | Error::EndpointsCoincide(..)
                | Error::ZeroOnBoundary(_)
                | Error::ZeroOutsideBands
                | Error::NonFiniteEndpoint(_)
                | Error::AlphaOutOfRange(_)
                | Error::BadIndex { .. }
                | Error::OrderTooSmall(_)
                | Error::WrongGenus(_)
                | Error::ModeRequiresGenusOne(_)
                | Error::RangeExceeded(_)
                | Error::PoleOfB(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
