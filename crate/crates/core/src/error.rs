use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cluster side must be a positive even integer, got {0}")]
    InvalidClusterSize(i64),

    #[error("coordinate ({x}, {y}) is not reachable from an L={l} cluster by one superlattice translation")]
    UnreachableSite { x: i64, y: i64, l: usize },

    #[error("site index {index} out of range for {n} sites")]
    SiteOutOfRange { index: usize, n: usize },

    #[error("two-site operation needs distinct sites, got ({0}, {0})")]
    SameSite(usize),

    #[error("{n} qubits exceed the supported maximum of {max}")]
    TooManyQubits { n: usize, max: usize },

    #[error("expected {expected} parameters, got {got}")]
    ParameterLength { expected: usize, got: usize },

    #[error("state lives in sector (n={got_n}, k={got_k}) but (n={n}, k={k}) was expected")]
    SectorMismatch { n: usize, k: usize, got_n: usize, got_k: usize },

    #[error("tied parameters are only defined for L=2, got L={0}")]
    TiedUnsupported(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("objective returned a non-finite value {value} at iteration {iteration}")]
    NonFinite { value: f64, iteration: usize },

    #[error("eigensolver did not converge: residual {residual:.3e} after {iterations} iterations")]
    EigenNotConverged { residual: f64, iterations: usize },

    #[error("need at least {needed} sweep points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("malformed state dump: {0}")]
    Dump(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
