use std::path::{Path, PathBuf};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] hefrac_core::Error),
}

/// Process exit codes, one per error family.
pub mod exit {
    pub const OK: i32 = 0;
    /// Unexpected internal failure.
    pub const INTERNAL: i32 = 1;
    /// Bad command line.
    pub const USAGE: i32 = 2;
    /// Configuration, manifest or input-file schema problems.
    pub const CONFIG: i32 = 3;
    /// Reading or writing files.
    pub const IO: i32 = 4;
    /// Solver breakdown, lost equilibrium or an unrecoverable step.
    pub const NUMERICAL: i32 = 5;
    /// Permeation transient could not be fitted.
    pub const FIT: i32 = 6;
    /// Threshold search could not bracket K_th.
    pub const BRACKET: i32 = 7;
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn csv(path: &Path, source: csv::Error) -> Self {
        Error::Csv {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use hefrac_core::Error as E;
        match self {
            Error::Parse { .. } | Error::Invalid(_) => exit::CONFIG,
            Error::Io { .. } => exit::IO,
            Error::Csv { source, .. } => {
                if source.is_io_error() {
                    exit::IO
                } else {
                    exit::CONFIG
                }
            }
            Error::Core(e) => match e {
                E::Config(_) | E::Geometry(_) | E::Domain { .. } | E::InvalidParameter(_) | E::Range { .. } => exit::CONFIG,
                E::Fit(_) => exit::FIT,
                E::Bracket(_) => exit::BRACKET,
                E::State(_) => exit::INTERNAL,
                E::NumericalBreakdown { .. }
                | E::Solver(_)
                | E::LocalSolve { .. }
                | E::Equilibrium(_)
                | E::Stability { .. }
                | E::StepFailure { .. } => exit::NUMERICAL,
            },
        }
    }
}
