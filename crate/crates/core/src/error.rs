use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("instance validation failed: {0}")]
    Validation(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("objective vectors differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("unknown mode `{0}`")]
    UnknownMode(String),

    #[error("site {site} cannot reach degree 2 within the radio/channel budget")]
    Channelization { site: usize },

    #[error("site {site} has no capacity-feasible path within the hop bound to any gateway")]
    RoutingInfeasible { site: usize },

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("no feasible solution after {attempts} attempts; last failure: {cause}")]
    ConstructionExhausted { attempts: usize, cause: Box<Error> },

    #[error("oracle guard refused instance: {0}")]
    GuardRefused(String),

    #[error("variant mismatch: archive is {archive}, truth is {truth}")]
    VariantMismatch { archive: String, truth: String },

    #[error("archive is empty")]
    EmptyArchive,
}

impl Error {
    /// True for failures that a fresh random draw of the pipeline may avoid.
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            Error::Channelization { .. } | Error::RoutingInfeasible { .. } | Error::Construction(_)
        )
    }
}
