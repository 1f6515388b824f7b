use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Numerics(#[from] kornlab::Error),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("verification failed: {0} check(s)")]
    Verification(usize),
}

impl CliError {
    /// 1 for failed checks and I/O, 2 for bad input, 3 when a numerical
    /// routine did not converge.
    pub fn exit_code(&self) -> i32 {
        use kornlab::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerics(e) => match e {
                E::NoConvergence { .. }
                | E::Quadrature { .. }
                | E::RootBracket { .. }
                | E::NonMonotone(_)
                | E::DegenerateDenominator => 3,
                _ => 2,
            },
            CliError::Io { .. } | CliError::Verification(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
