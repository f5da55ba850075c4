use std::path::PathBuf;

use arma_core::model::Variant;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Everything a command can fail with. Each variant maps onto one of the
/// documented process exit codes via [`CliError::exit_code`].
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("{path}: row {row}, column {column}: {message}")]
    Csv {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },

    #[error("checkpoint holds a {found} model but {expected} was requested")]
    VariantMismatch { expected: Variant, found: Variant },

    #[error("training diverged during epoch {epoch}; last good checkpoint written to {}", saved.display())]
    Diverged { epoch: usize, saved: PathBuf },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub const EXIT_CONFIG: i32 = 2;
    pub const EXIT_DATA: i32 = 3;
    pub const EXIT_DIVERGED: i32 = 4;

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => Self::EXIT_CONFIG,
            CliError::Data(_) | CliError::Csv { .. } | CliError::Checkpoint { .. } | CliError::VariantMismatch { .. } => {
                Self::EXIT_DATA
            }
            CliError::Diverged { .. } | CliError::Numeric(_) => Self::EXIT_DIVERGED,
            CliError::Io { .. } => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

impl From<arma_core::Error> for CliError {
    fn from(e: arma_core::Error) -> Self {
        use arma_core::Error as E;
        match e {
            E::Config(m) => CliError::Config(m),
            E::NonFinite(op) => CliError::Numeric(format!("non-finite values in {op}")),
            other => CliError::Data(other.to_string()),
        }
    }
}
