//! Error types for spec validation and pricing.

use alloc::string::String;
use core::fmt;

/// A problem description that violates its own invariants.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SpecError {
    EmptyId,
    NonPositiveStrike,
    NonPositiveMaturity,
    MissingBarrier,
    UnexpectedBarrier,
    NonPositiveBarrier,
    ZeroDimension,
    DimensionNotScalar,
    NonFiniteParam(String),
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecError::EmptyId => write!(f, "problem id must be non-empty"),
            SpecError::NonPositiveStrike => write!(f, "strike must be > 0"),
            SpecError::NonPositiveMaturity => write!(f, "maturity must be > 0"),
            SpecError::MissingBarrier => write!(f, "barrier kind requires a barrier level"),
            SpecError::UnexpectedBarrier => write!(f, "barrier given for a non-barrier kind"),
            SpecError::NonPositiveBarrier => write!(f, "barrier must be > 0"),
            SpecError::ZeroDimension => write!(f, "dimension must be >= 1"),
            SpecError::DimensionNotScalar => write!(f, "kind requires dimension 1"),
            SpecError::NonFiniteParam(k) => write!(f, "method param {k} is not finite"),
        }
    }
}

impl core::error::Error for SpecError {}

/// Failure raised by a pricing engine.
#[derive(Clone, Debug, PartialEq)]
pub enum PricingError {
    /// Market dimensions do not match the problem (e.g. basket spec on a
    /// scalar market).
    Dimension { expected: usize, got: usize },
    /// Problem kind routed to the wrong engine.
    Kind,
    /// Correlation matrix is not positive semi-definite.
    NotPositiveDefinite,
    /// Invalid numerical configuration (grid, surface, sample counts).
    Config(String),
    /// An iterative solver failed to converge within its iteration cap.
    NoConvergence { iterations: u32 },
    /// Inconsistent market data.
    Market(String),
}

impl fmt::Display for PricingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PricingError::Dimension { expected, got } => {
                write!(
                    f,
                    "market dimension {got} does not match problem dimension {expected}"
                )
            }
            PricingError::Kind => write!(f, "problem kind not handled by this engine"),
            PricingError::NotPositiveDefinite => {
                write!(f, "correlation matrix is not positive semi-definite")
            }
            PricingError::Config(msg) => write!(f, "configuration error: {msg}"),
            PricingError::NoConvergence { iterations } => {
                write!(f, "solver did not converge within {iterations} iterations")
            }
            PricingError::Market(msg) => write!(f, "invalid market data: {msg}"),
        }
    }
}

impl core::error::Error for PricingError {}

/// Stable numeric codes used when a pricing failure crosses the wire.
impl PricingError {
    pub fn code(&self) -> u32 {
        match self {
            PricingError::Dimension { .. } => 10,
            PricingError::Kind => 11,
            PricingError::NotPositiveDefinite => 12,
            PricingError::Config(_) => 13,
            PricingError::NoConvergence { .. } => 14,
            PricingError::Market(_) => 15,
        }
    }
}
