//! CLI error surface. Every failure exits non-zero with one
//! machine-parsable `error: ...` line on stderr.

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("io: {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {path}: {message}")]
    Json { path: String, message: String },

    #[error("annotation: image {image} box {index}: {message}")]
    BadBox {
        image: String,
        index: usize,
        message: String,
    },

    #[error("annotation: duplicate image id {id:?} in {path}")]
    DuplicateImage { id: String, path: String },

    #[error("config: {path}:{line}: {message}")]
    Config {
        path: String,
        line: usize,
        message: String,
    },

    #[error("csv: {path}:{line}: {message}")]
    Csv {
        path: String,
        line: usize,
        message: String,
    },

    #[error("samples: image {image} sample {index}: {message}")]
    BadSample {
        image: String,
        index: usize,
        message: String,
    },

    #[error("{0}")]
    Core(#[from] shiftlab::Error),

    #[error("{0}")]
    Other(String),
}

pub type CliResult<T> = Result<T, CliError>;

pub fn io_err(path: &std::path::Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source,
    }
}
