use thiserror::Error;

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read config {path}: {source}")]
    ConfigRead { path: String, source: std::io::Error },

    #[error("cannot parse config {path}: {message}")]
    ConfigParse { path: String, message: String },

    #[error("experiment `{experiment}`, key `{key}`: {message}")]
    Config { experiment: String, key: String, message: String },

    #[error("only {points} error samples fall inside the fit window, need at least 3")]
    InsufficientWindow { points: usize },

    #[error(transparent)]
    Core(#[from] homproj::Error),

    #[error("writing {path}: {message}")]
    Output { path: String, message: String },
}
