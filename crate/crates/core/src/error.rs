use std::path::PathBuf;

/// Errors raised by builders, solvers and persistence.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("solver error: {0}")]
    Solver(String),

    #[error("solver finished with status {0}")]
    NotOptimal(crate::conic::SolveStatus),

    #[error("layout mismatch: {0}")]
    Layout(String),

    #[error("policy is not certified: {0}")]
    Uncertified(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::Dimension {
            context: context.to_string(),
            expected,
            found,
        });
    }
    Ok(())
}
