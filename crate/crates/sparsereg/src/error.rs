use thiserror::Error;

/// Errors reported by this crate.
///
/// Variants split into two broad classes. Input problems (bad files, bad
/// configuration, contract violations the caller can fix) and modeling
/// failures (numerical trouble on data that was structurally valid). The
/// CLI maps the former to exit code 2 and the latter to exit code 1.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("rank-deficient design, dependent columns: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("did not converge: {0}")]
    NoConvergence(String),

    #[error("complete separation detected: {0}")]
    Separation(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True when the error describes a statistical or numerical failure on
    /// structurally valid input, as opposed to a usage or file problem.
    pub fn is_modeling_failure(&self) -> bool {
        match self {
            Error::RankDeficient { .. } | Error::NoConvergence(_) | Error::Separation(_) => true,
            Error::Stage { source, .. } => source.is_modeling_failure(),
            _ => false,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
