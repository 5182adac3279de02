use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate response: {0}")]
    DegenerateResponse(String),

    #[error("degenerate treatment arm: {0}")]
    DegenerateTreatmentArm(String),

    #[error("degenerate weights: {0}")]
    DegenerateWeights(String),

    #[error("degenerate score family: {0}")]
    DegenerateFamily(String),

    #[error("null space of span(alpha, beta) is empty but a nonzero orthogonal component of norm {required_norm} is required")]
    NullSpaceEmpty { required_norm: f64 },

    #[error("invalid link: {0}")]
    InvalidLink(String),

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("schema error{}: {message}", row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    Schema { row: Option<usize>, message: String },

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the data rather than by configuration.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Config(_) | Error::InvalidLink(_))
    }
}
