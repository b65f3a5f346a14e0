use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A numeric argument lies outside the domain of an operation.
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid source weights: {0}")]
    InvalidWeights(String),

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("model `{0}` does not expose a finite hidden-state support")]
    UnsupportedModel(String),

    #[error("sign pattern must carry exactly one minus sign, got {minus_count}")]
    DuplicateSignPosition { minus_count: usize },

    #[error("chain mixes correlated and anticorrelated links")]
    MixedOrientation,

    #[error("outcome independence fails at the hidden level (max |<AB> - <A><B>| = {deviation:e} at {pair})")]
    OutcomeIndependenceViolated { pair: String, deviation: f64 },

    #[error("no sign split exceeds epsilon = {epsilon} although |CHSH| = {chsh} > 4 epsilon")]
    Lemma1Contradiction { epsilon: f64, chsh: f64 },

    #[error("no signalling channel: Bob's expected marginals differ by {separation:e}")]
    NoChannel { separation: f64 },
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64) -> Self {
        Error::Domain { what, value }
    }
}
