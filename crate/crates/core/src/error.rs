use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid operator spec: {0}")]
    InvalidSpec(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("point {0:?} lies outside the grid")]
    OutsideGrid(Vec<usize>),
    #[error("grid too large for dense stencil ({points} points per axis, cap {cap})")]
    GridTooLarge { points: usize, cap: usize },
    #[error("empty measure")]
    EmptyMeasure,
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("{0}")]
    Precondition(String),
    #[error("conjugate gradient stagnated after {iterations} iterations (residual {residual:e})")]
    Stagnation { iterations: usize, residual: f64 },
    #[error("no contraction at this λ ({lambda})")]
    NoContraction { lambda: f64 },
    #[error("barrier search failed (β reached {beta})")]
    BarrierSearchFailed { beta: f64 },
    #[error("under-resolved frequency grid: exp(-A t) = {tail:e} at the largest frequency; need box halfwidth ≥ {needed_halfwidth:.3} or spacing ≤ {needed_spacing:.4}")]
    UnderResolved {
        tail: f64,
        needed_halfwidth: f64,
        needed_spacing: f64,
    },
    #[error("region too small for scale {scale}")]
    RegionTooSmall { scale: f64 },
    #[error("fewer than 6 usable points ({found})")]
    TooFewPoints { found: usize },
    #[error("degenerate data")]
    DegenerateData,
    #[error("unknown catalog entry `{0}`")]
    UnknownCatalog(String),
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
