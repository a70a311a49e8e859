use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An input violates a mathematical precondition (non-positive length,
    /// radius outside the channel, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration is structurally invalid (bad grid, unsupported
    /// topology, malformed scenario, ...).
    #[error("config error: {0}")]
    Config(String),

    /// The Gaussian pulse never reaches the threshold concentration; the
    /// receiver interprets this as "no residual signal".
    #[error("no crossing: Gaussian peak {peak} does not exceed threshold {threshold}")]
    NoCrossing { peak: f64, threshold: f64 },

    /// A numerical search (band crossing, root bracketing, bisection) failed.
    #[error("search error: {0}")]
    Search(String),

    /// A quadrature or series evaluation did not reach the requested
    /// tolerance; carries the achieved bound.
    #[error("accuracy error: {context} (achieved bound {achieved:e}, requested {requested:e})")]
    Accuracy {
        context: String,
        achieved: f64,
        requested: f64,
    },

    /// The PDE oracle produced an unstable field.
    #[error("stability error: {0}")]
    Stability(String),

    /// Scenario file I/O.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Scenario file parsing; message is line-anchored by the TOML parser.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
