use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter outside its domain: {0}")]
    ParameterDomain(String),

    /// The mean ray never leaves the region below the doubling cap.
    #[error("mean ray does not exit the region below t = {cap:e}")]
    NoRayExit { cap: f64 },

    #[error("convexity violation: {0}")]
    ConvexityViolation(String),

    #[error("numerical differentiation failed: {0}")]
    Differentiation(String),

    #[error("supporting-hyperplane check failed: {0}")]
    SupportCheck(String),

    #[error("slice G_{n} of the region is empty")]
    EmptySlice { n: u64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("no schedule element exceeds {m}")]
    ExhaustedSchedule { m: f64 },

    #[error("slab is empty: {0}")]
    EmptySlab(String),

    #[error("degenerate objective: {0}")]
    Degenerate(String),

    #[error("theorem proviso violated: {0}")]
    ProvisoViolated(String),

    #[error("iteration cap exceeded: {0}")]
    CapExceeded(String),

    #[error("every simulated run hit the horizon cap ({horizon})")]
    AllTruncated { horizon: u64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown tag `{0}`")]
    UnknownTag(String),
}
