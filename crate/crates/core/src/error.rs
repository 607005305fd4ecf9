use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Series did not reach the truncation tolerance within the term budget.
    #[error("series for alpha={alpha} at x={x} not converged after {terms} terms (last term {last_term:e})")]
    Truncation {
        alpha: f64,
        x: f64,
        terms: usize,
        last_term: f64,
    },

    #[error("no sign change of N_alpha in [{lo}, {hi}] for alpha={alpha}")]
    Bracket { alpha: f64, lo: f64, hi: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("depth {depth} exceeds the limit {limit}")]
    DepthOverflow { depth: usize, limit: usize },

    /// Sturm counting needs endpoints that are not roots.
    #[error("endpoint {endpoint} is a root of the polynomial; perturb the interval")]
    EndpointRoot { endpoint: f64 },

    #[error("obstacle has no homogeneity metadata")]
    MissingHomogeneity,

    #[error("all {paths} paths censored at t_max={t_max}")]
    Inconclusive { paths: usize, t_max: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
