use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExpError {
    #[error("config error: {0}")]
    Config(String),

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("trial with seed {seed} failed: {source}")]
    Trial {
        seed: u64,
        #[source]
        source: rpmix::Error,
    },

    #[error(transparent)]
    Core(#[from] rpmix::Error),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ExpError>;

/// Attaches the trial seed to a library error.
pub(crate) fn at_seed(seed: u64) -> impl FnOnce(rpmix::Error) -> ExpError {
    move |source| ExpError::Trial { seed, source }
}
