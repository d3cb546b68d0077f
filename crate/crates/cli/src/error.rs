use fold_core::FoldError;

/// Failure classes, one per exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or input files.
    Usage(String),
    /// A hypothesis check failed.
    Hypothesis(String),
    /// Numerical breakdown or a failed oracle comparison.
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Hypothesis(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Hypothesis(m) => write!(f, "hypothesis failed: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<FoldError> for CliError {
    fn from(e: FoldError) -> Self {
        let msg = e.to_string();
        match e {
            FoldError::Parameter { .. }
            | FoldError::Dimension { .. }
            | FoldError::Usage(_)
            | FoldError::Parse(_) => CliError::Usage(msg),
            FoldError::Domain(_) => CliError::Hypothesis(msg),
            FoldError::Numeric(_) | FoldError::NewtonDiverged { .. } | FoldError::Integrity(_) => {
                CliError::Numeric(msg)
            }
        }
    }
}

pub fn io_error(path: &std::path::Path, e: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{}: {e}", path.display()))
}
