use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("mask has no pixel with coverage >= 0.5")]
    EmptyMask,
    #[error("image dimensions must be at least 1x1")]
    ZeroDimension,
    #[error("buffer holds {actual} values, expected {expected}")]
    BufferLength { expected: usize, actual: usize },
    #[error("mask coverage outside [0, 1]")]
    CoverageOutOfRange,
    #[error("raster is {raster:?} but mask is {mask:?}")]
    DimensionMismatch { raster: (u32, u32), mask: (u32, u32) },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ComposeError {
    #[error("transformed instance collapses to {w}x{h} px")]
    DegenerateScale { w: u32, h: u32 },
    #[error("no position keeps the required fraction of a {w}x{h} instance in frame")]
    NoValidPosition { w: u32, h: u32 },
    #[error("the {} seed pool is empty", if *.styled { "styled" } else { "original" })]
    EmptyPool { styled: bool },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GapError {
    #[error("only {found} of {requested} valid patches found within the sampling budget")]
    InsufficientRegion { requested: usize, found: usize },
    #[error("{domain} domain has {scenes} scenes, not enough for a scene-disjoint split")]
    TooFewScenes { domain: &'static str, scenes: usize },
    #[error("empty test set")]
    EmptyTestSet,
    #[error("split fractions must be non-negative and sum to 1, got {0:?}")]
    BadFractions([f64; 3]),
    #[error("patch has {0} bytes, expected 32x32x3")]
    PatchSize(usize),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid config field `{field}`: {reason}")]
    Validation { field: String, reason: String },
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl ConfigError {
    pub(crate) fn invalid(field: &str, reason: impl Into<String>) -> Self {
        ConfigError::Validation { field: field.to_string(), reason: reason.into() }
    }
}

/// Errors surfaced by the batch commands.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Image { path: PathBuf, source: image::ImageError },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error(transparent)]
    Gap(#[from] GapError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Compose(#[from] ComposeError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn image(path: impl Into<PathBuf>, source: image::ImageError) -> Self {
        Error::Image { path: path.into(), source }
    }

    /// True for failures of the user's input (bad config or data) rather than the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Config(ConfigError::Io { .. }) | Error::Io { .. } | Error::Image { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
