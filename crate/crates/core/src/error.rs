use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} = {value} is outside the supported domain ({expected})")]
    Domain {
        what: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("{routine} did not converge after {terms} terms")]
    NoConvergence { routine: &'static str, terms: usize },

    #[error(
        "covariance matrix is not positive definite at pivot {pivot}; \
         add a diagonal jitter of about {suggested_jitter:e}"
    )]
    Cholesky { pivot: usize, suggested_jitter: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("bisection bracket failed at t = {t}: D(0) = {d_lo:e}, D({upper}) = {d_hi:e}")]
    Bracket { t: f64, upper: f64, d_lo: f64, d_hi: f64 },

    #[error("t = {t} lies outside the boundary table range [{lo}, {hi}]")]
    Range { t: f64, lo: f64, hi: f64 },

    #[error("malformed boundary table: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(what: &'static str, value: f64, expected: &'static str) -> Error {
    Error::Domain { what, value, expected }
}
