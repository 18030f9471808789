use thiserror::Error;

/// Errors raised by the numerical pipeline and the configuration layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("quadrature did not converge on [{lower}, {upper}]: estimated error {estimate:.3e} exceeds tolerance {tolerance:.3e}")]
    NonConvergence {
        lower: f64,
        upper: f64,
        estimate: f64,
        tolerance: f64,
    },

    #[error("invalid principal-value geometry: {0}")]
    InvalidGeometry(String),

    #[error("unsupported dimension {0}: {1}")]
    DimensionUnsupported(usize, String),

    #[error("cutoff extrapolation diverged: {0}")]
    ExtrapolationDivergence(String),

    #[error("detector state is not normalized (norm² = {0})")]
    Normalization(f64),

    #[error("no negative-energy region in window [{0}, {1}]")]
    NoNegativeRegion(f64, f64),

    #[error("smearings do not share a geometry class: {0}")]
    GeometryMismatch(String),

    #[error("lattice resolution insufficient: {0}")]
    Resolution(String),

    #[error("no feasible starting point: every sampled start violates causality")]
    NoFeasiblePoint,

    #[error("need at least {needed} data points for the fit, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("rescaled run has no negative well (upsilon = {0})")]
    InsufficientWells(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
