use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("column mapping is not strictly increasing at index {index}")]
    NonMonotoneMapping { index: usize },

    #[error("non-finite value {value} at index {index}")]
    NonFiniteValue { index: usize, value: f64 },

    #[error("invalid penalty: {0}")]
    InvalidPenalty(String),

    #[error("invalid volume: {0}")]
    InvalidVolume(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("negative data cost {value} at level {level}")]
    NegativeDataCost { level: usize, value: f64 },

    #[error("capacity overflow: {0}")]
    CapacityOverflow(String),

    #[error("no feasible labeling: every cut severs an infinite arc")]
    Infeasible,

    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),

    #[error("unstable time step {dt} (bound {bound})")]
    UnstableStep { dt: f64, bound: f64 },

    #[error("probability {value} outside [0, 1] at voxel {index}")]
    ProbabilityOutOfRange { index: usize, value: f64 },

    #[error("label {label} out of range for surface {surface}, column {column}")]
    LabelOutOfRange {
        surface: usize,
        column: usize,
        label: usize,
    },

    #[error("search space of {0} labelings exceeds the brute-force limit")]
    SearchSpaceTooLarge(f64),

    #[error("column sets differ: {auto} vs {reference}")]
    ColumnSetMismatch { auto: usize, reference: usize },

    #[error("surface point set is empty")]
    EmptySurface,

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("reference area is zero")]
    ZeroReferenceArea,

    #[error("contour is empty")]
    EmptyContour,

    #[error("surfaces out of order at column ({x}, {y}) between surfaces {lower} and {upper}")]
    SurfacesOutOfOrder {
        x: usize,
        y: usize,
        lower: usize,
        upper: usize,
    },

    #[error("downsampling factor {factor} exceeds dimension {dim}")]
    FactorExceedsDim { factor: usize, dim: usize },

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// Strips stage attribution and returns the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
