use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: missing column `{0}`")]
    MissingColumn(String),

    #[error("validation error at row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("duplicate observation for player {player}, match {match_index}")]
    DuplicateKey { player: usize, match_index: usize },

    #[error("unknown player index {0}")]
    UnknownPlayer(usize),

    #[error("panel is empty after filtering")]
    EmptyPanel,

    #[error("index out of range: {0}")]
    Bounds(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite log-density while updating `{parameter}`")]
    NonFinite { parameter: String },

    #[error("no feasible line-up under the active rules ({draws} draw(s) affected)")]
    Infeasible { draws: usize },

    #[error("stale posterior sample: fitted to panel {expected}, got panel {actual}")]
    StaleSample { expected: String, actual: String },

    #[error("conditioning set {0:?} has zero posterior probability")]
    UndefinedConditional(Vec<usize>),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Input or usage problems, as opposed to numerical/runtime failures.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::MissingColumn(_)
                | Error::Row { .. }
                | Error::Validation(_)
                | Error::DuplicateKey { .. }
                | Error::UnknownPlayer(_)
                | Error::EmptyPanel
                | Error::Bounds(_)
                | Error::Io { .. }
                | Error::Csv(_)
                | Error::Json(_)
                | Error::StaleSample { .. }
                | Error::UndefinedConditional(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
