use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Input(wgpca::Error),

    #[error("{0}")]
    Compute(wgpca::Error),

    #[error("writing {path}: {source}")]
    Output { path: String, source: wgpca::Error },
}

impl CliError {
    /// 0 success, 1 computational failure, 2 usage or input error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Input(_) => 2,
            CliError::Compute(_) | CliError::Output { .. } => 1,
        }
    }
}

/// Sorts an error raised while computing: bad arguments and data are input
/// errors, everything else is a failure of the computation.
pub fn classify(e: wgpca::Error) -> CliError {
    use wgpca::Error::*;
    match e {
        InvalidGrid(_)
        | GridMismatch(_)
        | Empty(_)
        | OutsideDomain { .. }
        | NotMonotone { .. }
        | NonFinite(_)
        | InvalidHistogram(_)
        | InvalidArgument(_)
        | Parse { .. }
        | Bundle(_) => CliError::Input(e),
        _ => CliError::Compute(e),
    }
}
