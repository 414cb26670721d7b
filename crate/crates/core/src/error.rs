use thiserror::Error;

use crate::lattice::LatticeCoord;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not hermitian: defect {defect:.3e}")]
    NotHermitian { defect: f64 },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("empty input")]
    EmptyInput,

    #[error("not a lattice point: ({a}, {b})")]
    NotALatticePoint { a: i64, b: i64 },
    #[error("({a}, {b}) is not a Kagome vertex")]
    NotKagome { a: i64, b: i64 },
    #[error("({a}, {b}) is not a Ruby vertex")]
    NotRuby { a: i64, b: i64 },
    #[error("window radius must be at least 1, got {0}")]
    BadRadius(i64),

    #[error("scattering parameters violate unitarity: defect {defect:.3e}")]
    InvalidParams { defect: f64 },
    #[error("state has support on {site} which cannot be stepped inside the window; pad the window")]
    SupportAtBoundary { site: String },
    #[error("window too small: {0}")]
    WindowTooSmall(String),

    #[error("path centers {index} and {next} are not joined by a dual link")]
    PathNotAdjacent { index: usize, next: usize },
    #[error("path revisits a center at position {index}")]
    PathSelfIntersecting { index: usize },
    #[error("path endpoint {0} is not an open face on the window boundary")]
    PathEndpoint(String),
    #[error("path center {center} at position {index} leaves the window interior")]
    PathLeavesWindow { index: usize, center: String },
    #[error("path is too short: {0} centers")]
    PathTooShort(usize),
    #[error("declared {side} tail {declared:?} contradicts the last in-window link class {found:?}")]
    TailMismatch { side: &'static str, declared: crate::lattice::WeightClass, found: crate::lattice::WeightClass },
    #[error("path does not separate the window: {0}")]
    SeparationFailure(String),
    #[error("index undefined: tail modulus {modulus:.6} exceeds bound {bound:.6} at {vertex}")]
    IndexUndefined { vertex: String, modulus: f64, bound: f64 },
    #[error("tail bound must lie in (0, 1), got {0}")]
    BadTailBound(f64),
    #[error("side membership missing for ruby vertex {0}")]
    MissingMembership(LatticeCoord),

    #[error("gap ambiguity: eigenvalue {eigenvalue:.3e} inside the guard band below unit modulus")]
    GapAmbiguity { eigenvalue: f64 },
    #[error("boundary residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    BoundaryResidual { residual: f64, tolerance: f64 },
    #[error("trace norm unbounded: nonzero tail blocks continue outside the window")]
    UnboundedSum,
    #[error("homotopy gap failure at parameter {parameter}: {reason}")]
    HomotopyGapFailure { parameter: f64, reason: String },
    #[error("index changed along homotopy: {first} at start, {found} at parameter {parameter}")]
    HomotopyIndexJump { first: i64, found: i64, parameter: f64 },
    #[error("insufficient padding: {0}")]
    InsufficientPadding(String),

    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
