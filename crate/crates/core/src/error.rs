use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid coding problem: {0}")]
    InvalidProblem(String),

    #[error("system matrix is numerically singular (condition estimate {condition:.3e})")]
    SingularSystem { condition: f64 },

    #[error("regularization weight must be positive, got {0}")]
    NonPositiveLambda(f64),

    #[error("nonnegative oracle supports K <= {max}, got K = {k}")]
    OracleTooLarge { k: usize, max: usize },

    #[error("matrix has a zero diagonal entry at row {0}")]
    ZeroDiagonal(usize),

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("box {what} is outside the frame: {detail}")]
    BoxOutOfFrame { what: &'static str, detail: String },

    #[error("degenerate box {w}x{h}: width and height must be at least 2 px")]
    DegenerateBox { w: f64, h: f64 },

    #[error("neighbor count {k} exceeds store size {size}")]
    KTooLarge { k: usize, size: usize },

    #[error("indicator position {position} outside 1..={size}")]
    IndicatorOutOfRange { position: usize, size: usize },

    #[error("affine warp has zero area")]
    DegenerateWarp,

    #[error("patch is all zero and cannot be normalized")]
    ZeroPatch,

    #[error("every particle failed patch extraction or encoding")]
    AllParticlesDegenerate,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}, line {line}: {message}", path = .path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("prediction has {pred} rows but ground truth has {gt}")]
    LengthMismatch { pred: usize, gt: usize },

    #[error("no frames found in {0}")]
    NoFrames(PathBuf),

    #[error("failed to decode {path}: {source}")]
    Decode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
