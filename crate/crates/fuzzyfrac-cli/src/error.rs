use thiserror::Error;

use crate::expr::ParseError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Lib(#[from] fuzzyfrac::Error),

    #[error("expression error: {0}")]
    Expr(#[from] ParseError),

    #[error("{0}")]
    Usage(String),
}
