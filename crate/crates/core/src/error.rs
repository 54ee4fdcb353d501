//! Crate-wide error type. Constructors reject defective inputs rather than
//! repairing them, so most variants carry the measured defect.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("cannot normalize null vector (norm {norm:.3e})")]
    ZeroNorm { norm: f64 },

    #[error("dimension must be at least 2, got {dim}")]
    DimensionTooSmall { dim: usize },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (defect {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("matrix is not idempotent (defect {defect:.3e})")]
    NotIdempotent { defect: f64 },

    #[error("projector trace {trace:.12} is not an integer rank within tolerance")]
    TraceRankMismatch { trace: f64 },

    #[error("matrix is not unitary (defect {defect:.3e})")]
    NotUnitary { defect: f64 },

    #[error("density matrix trace must be 1, got {trace:.12}")]
    TraceNotOne { trace: f64 },

    #[error("density matrix is not positive semidefinite (eigenvalue {eigenvalue:.3e})")]
    NotPositive { eigenvalue: f64 },

    #[error("geodesic undefined / non-unique between orthogonal rays (overlap {overlap:.3e})")]
    GeodesicUndefined { overlap: f64 },

    #[error("open-path phase undefined for orthogonal endpoints (overlap {overlap:.3e})")]
    OrthogonalEndpoints { overlap: f64 },

    #[error("vanishing overlap between consecutive samples {left} and {right}")]
    VanishingOverlap { left: usize, right: usize },

    #[error("not a loop: first and last samples are different rays (|overlap| = {overlap:.12})")]
    NotALoop { overlap: f64 },

    #[error("times must be strictly increasing (violated at index {index})")]
    NonIncreasingTimes { index: usize },

    #[error("path needs at least 2 samples, got {len}")]
    PathTooShort { len: usize },

    #[error("interpolation parameter must lie in [0, 1], got {s}")]
    InterpolantOutOfRange { s: f64 },

    #[error("refinement factor must be at least 2, got {factor}")]
    RefineFactorTooSmall { factor: usize },

    #[error("lift length {got} does not match path length {expected}")]
    LiftLengthMismatch { expected: usize, got: usize },

    #[error("lift sample {index} is not a representative of the path ray at that index")]
    LiftOffRay { index: usize },

    #[error("history needs at least one event")]
    EmptyHistory,

    #[error("event time {time} is not on the propagator grid")]
    TimeNotOnGrid { time: f64 },

    #[error("inputs must share the same time grid")]
    GridMismatch,

    #[error("fine-grained tuple count {count} exceeds cap {cap}")]
    TupleCapExceeded { count: usize, cap: usize },

    #[error("alternatives at time slot {slot} do not sum to the identity (defect {defect:.3e})")]
    NotExhaustive { slot: usize, defect: f64 },

    #[error("alternatives {left} and {right} at time slot {slot} are not mutually exclusive (defect {defect:.3e})")]
    NotExclusive { slot: usize, left: usize, right: usize, defect: f64 },

    #[error("histories {left} and {right} do not differ in exactly one time slot; join undefined")]
    JoinUndefined { left: usize, right: usize },

    #[error("index {index} out of range for {len} histories")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("unknown scenario {name:?}")]
    UnknownScenario { name: String },

    #[error("unknown parameter {name:?} for scenario {scenario:?}")]
    UnknownParameter { scenario: String, name: String },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("n_steps must lie in [4, 2^20], got {n}")]
    StepsOutOfRange { n: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Config(#[from] serde_json::Error),
}
