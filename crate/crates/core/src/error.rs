use alloc::string::String;

/// Errors produced by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("tensor holds {actual} values but its grid needs {expected}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("tensor value at flat index {index} is negative or not finite")]
    InvalidValue { index: usize },

    #[error("expected a {expected} tensor")]
    WrongCoordinateKind { expected: &'static str },

    #[error("point ({x}, {y}, {z}) lies outside the grid")]
    OutOfGrid { x: f64, y: f64, z: f64 },

    #[error("voxel index ({iz}, {iy}, {ix}) lies outside the grid")]
    IndexOutOfGrid { iz: usize, iy: usize, ix: usize },

    #[error("CFAR window around ({iz}, {iy}, {ix}) overruns the volume boundary")]
    WindowOverrun { iz: usize, iy: usize, ix: usize },

    #[error("volume axis {axis} has {size} cells, CFAR window needs at least {required}")]
    VolumeTooSmall {
        axis: usize,
        size: usize,
        required: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("embedding has zero or non-finite norm")]
    ZeroNorm,

    #[error("embedding dimensions differ ({left} vs {right})")]
    DimensionMismatch { left: usize, right: usize },

    #[error("no negatives to mine from")]
    EmptyNegatives,

    #[error("frame gap {gap} is not below the sampling window {window}")]
    FrameGap { gap: u64, window: u64 },

    #[error("loss terms must be finite and non-negative")]
    InvalidLoss,

    #[error("loss coefficients must be finite and non-negative")]
    NegativeCoefficient,

    #[error("innovation covariance is not positive definite")]
    NumericalFailure,

    #[error("detections of classes {first} and {other} mixed in one tracker step")]
    MixedClass { first: u32, other: u32 },

    #[error("id {id} appears twice in frame")]
    DuplicateId { id: u64 },

    #[error("no ground-truth objects were accumulated")]
    NoGroundTruth,

    #[error("matrix of {rows}x{cols} exceeds the exhaustive search limit")]
    TooLarge { rows: usize, cols: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
