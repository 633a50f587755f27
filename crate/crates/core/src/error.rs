use thiserror::Error;

/// Errors raised by the numerical engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value in input field `{0}`")]
    NonFiniteInput(&'static str),
    #[error("field support lies within {cells} cells of the box boundary; enlarge the box")]
    SupportTouchesBoundary { cells: usize },
    #[error("matrix is not antisymmetric (max |A + A^T| = {0:e})")]
    NotAntisymmetric(f64),
    #[error("masses differ by {rel:.3e} (relative), above the 0.5% limit")]
    MassMismatch { rel: f64 },
    #[error("field is not radially symmetric about the origin (asymmetry {0:.3e})")]
    NotRadial(f64),
    #[error("grid of {cells} cells exceeds the brute-force limit of {limit}")]
    GridTooLarge { cells: usize, limit: usize },
    #[error("mass {mass:.4} exceeds 90% of the box volume {volume:.4}")]
    CapacityExceeded { mass: f64, volume: f64 },
    #[error("no convergence after {iters} iterations (last residuals: {residuals:?})")]
    NoConvergence { iters: usize, residuals: Vec<f64> },
    #[error("transport map sends mass outside the box")]
    MapLeavesBox,
    #[error("nutrient became negative ({min:.3e}); reduce the time step")]
    NutrientNegative { min: f64 },
    #[error("snapshot schedule is empty")]
    SnapshotScheduleEmpty,
    #[error("grids or snapshot schedules do not match")]
    GridMismatch,
    #[error("initial nutrient reaches capacity (max n0 = {0}); stationary state requires max n0 < 1")]
    NutrientAtCapacity(f64),
    #[error("mass factor {m} outside the attainable range for n0 = {n0}")]
    MOutOfRange { m: f64, n0: f64 },
    #[error("checkpoint at t = {0} is not covered by the reference trajectory")]
    CheckpointOutOfRange(f64),
    #[error("`{0}` is not in the built-in harmonic family")]
    NotHarmonic(String),
    #[error("snapshot spacing {spacing} exceeds {limit}")]
    SparseTrajectory { spacing: f64, limit: f64 },
    #[error("no cell reaches the patch threshold")]
    EmptyPatch,
    #[error("patch does not contain the ball of radius {0}")]
    BallNotContained(f64),
    #[error("no admissible pair of finite arrival times")]
    NoFinitePairs,
    #[error("patch is not star-shaped about the origin ({rays} rays with multiple crossings)")]
    NotStarShaped { rays: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("snapshot format: {0}")]
    Format(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
