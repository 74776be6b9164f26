use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(&'static str),

    /// Inconsistent or incomplete configuration.
    #[error("configuration error: {0}")]
    Config(&'static str),

    /// A numerical routine did not converge; `estimate` is the best value reached.
    #[error("numerical routine did not converge (estimate {estimate:e}, error bound {error:e})")]
    Numeric { estimate: f64, error: f64 },

    /// No threshold on the grid keeps the error rate at or below the target.
    #[error("no decision threshold reaches the target error rate (minimum achievable {min_fwer:.4})")]
    Calibration { min_fwer: f64 },
}
