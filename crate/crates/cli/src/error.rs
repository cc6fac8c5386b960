use koopman_kkl::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("artifact {path}: {message}")]
    Artifact { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] CoreError),
}

/// Error class, used for the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Sampling,
    Numeric,
    Filesystem,
    Other,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Other => 1,
            ErrorClass::Config => 2,
            ErrorClass::Sampling => 3,
            ErrorClass::Numeric => 4,
            ErrorClass::Filesystem => 5,
        }
    }
}

impl CliError {
    pub fn class(&self) -> ErrorClass {
        match self {
            CliError::Config(_) => ErrorClass::Config,
            CliError::Artifact { .. } | CliError::Io { .. } => ErrorClass::Filesystem,
            CliError::Core(e) => match e {
                CoreError::InvalidLambda { .. }
                | CoreError::Precondition(_)
                | CoreError::Dimension(_) => ErrorClass::Config,
                CoreError::SamplingStarved { .. } => ErrorClass::Sampling,
                CoreError::IntegrationDiverged { .. }
                | CoreError::PeriodUndetected { .. }
                | CoreError::RankDeficient { .. }
                | CoreError::NotPositiveDefinite { .. }
                | CoreError::NoConvergence { .. }
                | CoreError::DegenerateEigenfunction { .. } => ErrorClass::Numeric,
                CoreError::Io { .. } | CoreError::Parse { .. } | CoreError::Schema(_) => ErrorClass::Filesystem,
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.class().exit_code()
    }
}
