use thiserror::Error;

/// Exit statuses of the `mixop` binary.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const VERDICT_FAILED: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NUMERIC: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] mixop_core::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use mixop_core::Error as E;
        match self {
            CliError::Schema(_) | CliError::Config(_) => exit::CONFIG,
            CliError::Core(e) => match e {
                E::Argument(_)
                | E::Domain(_)
                | E::Hypothesis(_)
                | E::Unsupported(_)
                | E::Data(_)
                | E::Divergent { .. } => exit::CONFIG,
                E::Estimation(_)
                | E::Quadrature { .. }
                | E::Numeric(_)
                | E::PerronViolation { .. }
                | E::Logic(_) => exit::NUMERIC,
            },
            CliError::Io { .. } => exit::CONFIG,
        }
    }
}
