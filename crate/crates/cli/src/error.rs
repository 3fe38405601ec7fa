use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{file}:{line}: {msg}")]
    Parse { file: String, line: usize, msg: String },

    #[error("stage {stage} failed: {err}")]
    Stage {
        stage: &'static str,
        err: susy_inversion::Error,
    },

    #[error("cannot write {path}: {err}")]
    Output { path: String, err: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Parse { .. } => 2,
            CliError::Stage { .. } | CliError::Output { .. } => 3,
        }
    }

    /// Core errors raised while reading an input become parse errors.
    pub fn from_input(source: &str, err: susy_inversion::Error) -> Self {
        match err {
            susy_inversion::Error::Parse { line, msg } => CliError::Parse {
                file: source.to_string(),
                line,
                msg,
            },
            other => CliError::Parse {
                file: source.to_string(),
                line: 0,
                msg: other.to_string(),
            },
        }
    }
}

pub trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T> StageContext<T> for susy_inversion::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|err| CliError::Stage { stage, err })
    }
}
