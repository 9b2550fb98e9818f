use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SsfError {
    #[error(transparent)]
    Core(#[from] ssf_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: invalid JSON: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    /// The data cannot support the requested analysis (e.g. an empty partition).
    #[error("{0}")]
    Data(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("{stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<SsfError>,
    },
}

pub type Result<T> = std::result::Result<T, SsfError>;

impl SsfError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SsfError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        SsfError::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// 2 for configuration and argument problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            SsfError::Config(_) => 2,
            SsfError::Core(
                ssf_core::Error::InvalidConfig(_) | ssf_core::Error::IndexOutOfRange { .. },
            ) => 2,
            SsfError::Stage { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}

/// Tags an error with the pipeline stage it came from.
pub trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T, E: Into<SsfError>> StageContext<T> for std::result::Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| SsfError::Stage {
            stage,
            source: Box::new(e.into()),
        })
    }
}
