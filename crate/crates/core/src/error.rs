use thiserror::Error;

/// Errors raised by the allocation engine.
///
/// Estimation outcomes that are expected to fail on some replicates (empty
/// conditioning sets, ill-conditioned ratios, singular weights) are *not*
/// errors; they are reported through [`crate::estimators::EstimateStatus`] and
/// [`crate::models::WeightFailure`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} is outside the domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("model construction failed: {0}")]
    Model(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(what: &'static str, value: f64, domain: &'static str) -> Error {
    Error::Domain {
        what,
        value,
        domain,
    }
}
