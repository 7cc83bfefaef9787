//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh parse error: {0}")]
    MeshParse(String),

    #[error("non-conforming mesh: {0}")]
    NonConforming(String),

    #[error("mesh geometry error: {0}")]
    MeshGeometry(String),

    #[error("unmatched periodic face {face} (midpoint {x:.6}, {y:.6})")]
    UnmatchedPeriodicFace { face: usize, x: f64, y: f64 },

    #[error("unsupported polynomial order k = {0} (supported: 1..=4)")]
    UnsupportedOrder(usize),

    #[error("singular nodal basis for order {0}")]
    SingularBasis(usize),

    #[error("numerically singular pivot at block row {block} (element {element}): |pivot| = {pivot:.3e}")]
    SingularPivot {
        block: usize,
        element: usize,
        pivot: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("non-finite value detected: {0}")]
    NonFinite(String),

    #[error("negative cell-mean depth in element {element} at t = {t:.6e} (CFL violation upstream)")]
    NegativeMeanDepth { element: usize, t: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
