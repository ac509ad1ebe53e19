use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter point outside the region where the kernel or mixing
    /// measure is defined.
    #[error("domain error in {component}: {value} ({reason})")]
    Domain {
        component: String,
        value: f64,
        reason: &'static str,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid interarrival at index {index}: {value} (interarrivals must be strictly positive)")]
    InvalidInterarrival { index: usize, value: f64 },

    /// The kernel can put mass on `(-inf, 0]`, so it cannot drive interarrivals.
    #[error("invalid interarrival law: {0}")]
    InvalidInterarrivalLaw(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Quadrature did not reach the requested tolerance. The best estimate is
    /// still carried so callers can report it.
    #[error("quadrature did not converge: estimate {estimate} with error estimate {error_estimate} (tolerance {tolerance})")]
    Accuracy {
        estimate: f64,
        error_estimate: f64,
        tolerance: f64,
    },

    #[error("capacity exceeded: requested {requested}, limit {limit}")]
    Capacity { requested: u64, limit: u64 },

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate test: {0}")]
    Degenerate(String),

    #[error("t = {t} lies beyond the observed horizon {horizon}")]
    OutOfHorizon { t: f64, horizon: f64 },

    #[error("ingestion error: {0}")]
    Ingestion(String),
}

impl Error {
    pub(crate) fn domain(component: impl Into<String>, value: f64, reason: &'static str) -> Self {
        Error::Domain {
            component: component.into(),
            value,
            reason,
        }
    }
}
