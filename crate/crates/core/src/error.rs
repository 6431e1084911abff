use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "scaling angle {theta} rad is not below the critical angle pi/{exponent} = {critical} rad; \
         the scaled exp(-a x^{exponent}) initial state is not square integrable"
    )]
    ThetaAboveCritical {
        theta: f64,
        critical: f64,
        exponent: u32,
    },

    #[error("unsupported derivative order {0} (expected 1 or 2)")]
    UnsupportedOrder(u32),

    #[error("operands live on different grids")]
    GridMismatch,

    #[error("{what} is not finite at grid point {index} (x = {x})")]
    NonFinite {
        what: &'static str,
        index: usize,
        x: f64,
    },

    #[error("|{what}| = {magnitude:e} exceeds the bound {bound:e} at grid point {index} (x = {x})")]
    Overflow {
        what: &'static str,
        index: usize,
        x: f64,
        magnitude: f64,
        bound: f64,
    },

    #[error("initial state norm {norm} deviates from 1; box too small for the packet")]
    Normalization { norm: f64 },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("eigenvector {index} is self-orthogonal (c-norm {c_norm:e}); contour parameters near an exceptional point")]
    SelfOrthogonal { index: usize, c_norm: f64 },

    #[error("initial state is poorly represented by the eigenbasis (reconstruction error {0:e})")]
    PoorRepresentation(f64),

    #[error("propagation diverged at t = {time}: norm grew by a factor {growth}")]
    Divergence { time: f64, growth: f64 },

    #[error("snapshot times do not match (candidate t = {candidate}, reference t = {reference})")]
    TimeMismatch { candidate: f64, reference: f64 },
}

impl Error {
    /// Configuration or precondition failures, as opposed to numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidGrid(_)
                | Error::InvalidParameter { .. }
                | Error::ThetaAboveCritical { .. }
                | Error::UnsupportedOrder(_)
                | Error::GridMismatch
                | Error::Normalization { .. }
                | Error::TimeMismatch { .. }
        )
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
