use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported dimension {0}; flat models have n = 1 or n = 2")]
    Dimension(usize),
    #[error("tube radius must exceed 1, got {0}")]
    TubeRadius(f64),
    #[error("lattice vector {k:?} has |k| = {norm}, expected 1/h = {expected}")]
    OffShell { k: [i64; 2], norm: f64, expected: f64 },
    #[error("lattice shell |k|^2 = {r2} has {points} points in dimension {dim}; need at least {needed}")]
    ShellTooThin { r2: i64, dim: usize, points: usize, needed: usize },
    #[error("derivative order {0} not supported (max 2)")]
    DerivativeOrder(usize),
    #[error("quadrature underresolved: {0}")]
    Underresolved(String),
    #[error("normal undefined: |grad F| = {0:e}")]
    DegenerateNormal(f64),
    #[error("angles undefined on the zero section")]
    ZeroSection,
    #[error("intersection with the energy shell is empty")]
    EmptyIntersection,
    #[error("tangency between the hypersurface and the energy shell (projected gradient {0:e})")]
    Tangency(f64),
    #[error("degenerate hypersurface: {0}")]
    Degenerate(String),
    #[error("unsupported hypersurface for this operation: {0}")]
    UnsupportedSurface(String),
    #[error("point is not on the energy shell: |xi| = {0}")]
    OffEnergyShell(f64),
    #[error("slice misses the energy curve")]
    EmptySlice,
    #[error("invalid window: {0}")]
    Window(String),
    #[error("fit needs at least {needed} points, got {got}")]
    FitPoints { needed: usize, got: usize },
    #[error("degenerate fit: {0}")]
    FitDegenerate(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
