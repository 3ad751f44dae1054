use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Io,
    Schema,
    Validation,
    Analysis,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },

    #[error("{scale} score {value} on line {line} is outside [{min}, {max}]")]
    ScoreRange {
        scale: &'static str,
        value: i64,
        min: i64,
        max: i64,
        line: usize,
    },

    #[error("duplicate score row for mother `{mother_id}` at visit {visit_month}")]
    DuplicateKey { mother_id: String, visit_month: u32 },

    #[error("degenerate face geometry: lip corners coincide")]
    DegenerateFace,

    #[error("malformed smile: {0}")]
    MalformedSmile(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("zero variance: {0}")]
    ZeroVariance(&'static str),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("session {session}: {source}")]
    Session {
        session: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } => ErrorKind::Io,
            Error::MissingColumn(_) | Error::Parse { .. } => ErrorKind::Schema,
            Error::Validation { .. }
            | Error::ScoreRange { .. }
            | Error::DuplicateKey { .. }
            | Error::Config(_) => ErrorKind::Validation,
            Error::DegenerateFace
            | Error::MalformedSmile(_)
            | Error::UndefinedCorrelation(_)
            | Error::ZeroVariance(_)
            | Error::Precondition(_) => ErrorKind::Analysis,
            Error::Session { source, .. } => source.kind(),
        }
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub fn in_session(self, session: &str) -> Self {
        Error::Session {
            session: session.to_string(),
            source: Box::new(self),
        }
    }
}
