use thiserror::Error;

/// Errors raised by model construction, LMI assembly, solving and verification.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    /// `I - Delta * E_delta` is too close to singular for the loop to be closed.
    #[error("ill-posed uncertainty loop: reciprocal condition {rcond:e} below {threshold:e}")]
    IllPosed { rcond: f64, threshold: f64 },

    #[error("{0} is not positive definite")]
    NotPositiveDefinite(&'static str),

    #[error("state matrix is not Hurwitz (spectral abscissa {0:e})")]
    NotHurwitz(f64),

    #[error("H-infinity bisection failed: {0}")]
    Bisection(String),

    #[error("eigenvalue iteration did not converge")]
    EigenFailure,

    /// The synthesis LMIs have no solution at this performance level.
    #[error("gamma = {gamma} is infeasible{}", frontier_note(*.frontier))]
    Infeasible { gamma: f64, frontier: Option<f64> },

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn frontier_note(frontier: Option<f64>) -> String {
    match frontier {
        Some(g) => format!(" (smallest feasible gamma found: {g})"),
        None => String::new(),
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
