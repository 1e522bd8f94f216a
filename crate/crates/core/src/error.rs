use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the centerline toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("corrupt header {path}: {reason}")]
    Header { path: PathBuf, reason: String },

    #[error("payload length mismatch in {path}: expected {expected} bytes, found {found}")]
    LengthMismatch {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("unknown dtype `{0}`")]
    UnknownDtype(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: {0:?} vs {1:?}")]
    DimMismatch([usize; 3], [usize; 3]),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("coordinate-space mismatch: {0:?} vs {1:?}")]
    SpaceMismatch(crate::geom::Space, crate::geom::Space),

    #[error("non-finite coordinate ({0}, {1}, {2})")]
    NonFinite(f64, f64, f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("graph is disconnected")]
    Disconnected,

    #[error("degenerate polyline: {0}")]
    Degenerate(&'static str),

    #[error("unknown interpolation method `{0}`")]
    UnknownMethod(String),

    #[error("deformation diverged at stage {stage}, step {step}")]
    Diverged {
        stage: usize,
        step: usize,
        trace: Box<crate::deform::DeformTrace>,
    },

    #[error("centerline lies outside the structure ({inside} of {total} points inside)")]
    CenterlineOutside { inside: usize, total: usize },

    #[error("config error at line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Machine-readable kind tag, used by the CLI error report.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Header { .. } => "header",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::UnknownDtype(_) => "unknown_dtype",
            Error::InvalidGrid(_) => "invalid_grid",
            Error::DimMismatch(..) => "dim_mismatch",
            Error::Empty(_) => "empty_input",
            Error::SpaceMismatch(..) => "space_mismatch",
            Error::NonFinite(..) => "non_finite",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Disconnected => "disconnected",
            Error::Degenerate(_) => "degenerate",
            Error::UnknownMethod(_) => "unknown_method",
            Error::Diverged { .. } => "diverged",
            Error::CenterlineOutside { .. } => "centerline_outside",
            Error::Config { .. } => "config",
            Error::Json { .. } => "json",
        }
    }

    /// The file path involved in the error, when there is one.
    pub fn path(&self) -> Option<&std::path::Path> {
        match self {
            Error::Io { path, .. }
            | Error::Header { path, .. }
            | Error::LengthMismatch { path, .. }
            | Error::Json { path, .. } => Some(path),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
