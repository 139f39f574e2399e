use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Widths, sizes or guardrails rejected before any work started.
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("unsupported regime: r = {r} exceeds c = {c} (the construction needs r <= c)")]
    UnsupportedRegime { r: u32, c: u32 },

    /// An interface was used in a way its binding does not allow.
    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("query budget exceeded: {role} made more than {limit} queries")]
    BudgetExceeded { role: &'static str, limit: u64 },

    #[error("advice budget exceeded: {used} bits emitted, {limit} allowed")]
    AdviceExceeded { used: u64, limit: u64 },

    #[error("protocol violation: {0}")]
    Protocol(String),

    /// A component broke a contract it declared (for example a simulator
    /// that is not stateless).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("search failure: {0}")]
    SearchFailure(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
