//! Typed failures for every reader and writer, each carrying its location.

use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// One bad CSV row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: malformed header: {reason}", path.display())]
    MalformedHeader { path: PathBuf, reason: String },
    #[error("{}: malformed file: {reason}", path.display())]
    MalformedFile { path: PathBuf, reason: String },
    #[error("{}: {width}x{height} is too large", path.display())]
    DimensionOverflow { path: PathBuf, width: u64, height: u64 },
    #[error("{}: value {value} at pixel ({x},{y}) is out of range", path.display())]
    OutOfRange { path: PathBuf, x: u32, y: u32, value: f64 },
    #[error("{}: missing columns {}", path.display(), missing.join(", "))]
    MissingColumns { path: PathBuf, missing: Vec<String> },
    #[error("{}: {}", path.display(), join(rows))]
    Rows { path: PathBuf, rows: Vec<RowError> },
    #[error("{}: {message}", path.display())]
    Json { path: PathBuf, message: String },
    #[error("{}: {}", dir.display(), problems.join("; "))]
    InvalidBundle { dir: PathBuf, problems: Vec<String> },
}

impl FormatError {
    /// Stable short name of the failure kind.
    pub fn code(&self) -> &'static str {
        match self {
            Self::Io { .. } => "io",
            Self::MalformedHeader { .. } => "malformed_header",
            Self::MalformedFile { .. } => "malformed_file",
            Self::DimensionOverflow { .. } => "dimension_overflow",
            Self::OutOfRange { .. } => "out_of_range",
            Self::MissingColumns { .. } => "missing_columns",
            Self::Rows { .. } => "parse_error",
            Self::Json { .. } => "json",
            Self::InvalidBundle { .. } => "invalid_bundle",
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }
}

pub type Result<T, E = FormatError> = std::result::Result<T, E>;
