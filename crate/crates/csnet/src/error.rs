use std::path::PathBuf;

use crate::dataset::DatasetError;
use crate::model::ModelError;

#[derive(Debug, thiserror::Error)]
pub enum CsnetError {
    #[error(transparent)]
    Core(#[from] csnet_core::Error),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("[{phase}] {source}")]
    Phase {
        phase: &'static str,
        #[source]
        source: Box<CsnetError>,
    },
}

impl CsnetError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    /// Innermost error, skipping phase wrappers.
    pub fn root(&self) -> &CsnetError {
        match self {
            CsnetError::Phase { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit status for this error class.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            CsnetError::Config(_) | CsnetError::Core(csnet_core::Error::Config(_)) => 2,
            CsnetError::Dataset(_) | CsnetError::Io { .. } => 3,
            CsnetError::Model(_) => 4,
            CsnetError::Core(csnet_core::Error::Input(_)) => 5,
            CsnetError::Core(_) => 6,
            CsnetError::Phase { .. } => 1,
        }
    }
}

pub type Result<T, E = CsnetError> = std::result::Result<T, E>;

/// Tags errors with the pipeline phase they came from.
pub trait PhaseExt<T> {
    fn phase(self, phase: &'static str) -> Result<T>;
}

impl<T, E: Into<CsnetError>> PhaseExt<T> for std::result::Result<T, E> {
    fn phase(self, phase: &'static str) -> Result<T> {
        self.map_err(|e| CsnetError::Phase { phase, source: Box::new(e.into()) })
    }
}
