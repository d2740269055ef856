use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VersionError {
    #[error("empty version string")]
    Empty,
    #[error("version `{0}` does not start with a digit")]
    NoLeadingDigit(String),
    #[error("version `{0}` has more than three components")]
    TooManyComponents(String),
    #[error("version `{input}` has a non-decimal component `{component}`")]
    BadComponent { input: String, component: String },
    #[error("version `{0}` has a component above 1000000")]
    ComponentTooLarge(String),
}

#[derive(Debug, Error)]
pub enum OverrideError {
    #[error("cannot read override table {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("override table line {line}: {reason}")]
    Line { line: usize, reason: String },
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("no parseable starbang line in {path}")]
    NoMatch { path: PathBuf },
}

#[derive(Debug, Error)]
pub enum WhichError {
    #[error("package `{0}` not found on the search path")]
    NotFound(String),
    #[error("package `{package}` has no version information in {path}")]
    NoVersion { package: String, path: PathBuf },
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RequirementError {
    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error("argument {position}: {reason}")]
    Inline { position: usize, reason: String },
}

impl RequirementError {
    /// 1-based line number for file errors.
    pub fn line(&self) -> Option<usize> {
        match self {
            RequirementError::Line { line, .. } => Some(*line),
            RequirementError::Inline { .. } => None,
        }
    }

    pub fn reason(&self) -> &str {
        match self {
            RequirementError::Line { reason, .. } | RequirementError::Inline { reason, .. } => {
                reason
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Parse(#[from] RequirementError),
}

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("package `{0}` not found in archive")]
    NotInArchive(String),
    #[error("descriptor for `{package}`: {reason}")]
    Descriptor { package: String, reason: String },
    #[error("fetching {location}: {reason}")]
    Fetch { location: String, reason: String },
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("invalid source location `{0}`")]
    BadLocation(String),
}

#[derive(Debug, Error)]
pub enum SetupError {
    #[error("{0} already exists (use replace to overwrite)")]
    Exists(PathBuf),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("a host requirement line needs a known host version")]
    NoHostVersion,
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("work directory {0} is not empty (use replace to clear it)")]
    WorkdirNotEmpty(PathBuf),
    #[error("preparing work directory {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Debug, Error)]
pub enum CoverageError {
    #[error("cannot read ground truth {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("ground truth: {0}")]
    Csv(#[from] csv::Error),
    #[error("ground truth row {row}: {reason}")]
    Row { row: usize, reason: String },
}
