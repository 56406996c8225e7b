use thiserror::Error;

/// Errors produced by the patchshade core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("jet order mismatch: {left} vs {right}")]
    OrderMismatch { left: usize, right: usize },
    #[error("requested order {requested} exceeds supported order {available}")]
    OrderTooLarge { requested: usize, available: usize },
    #[error("non-positive constant term {value}: frame degenerate")]
    NonPositiveConstant { value: f64 },
    #[error("tensor of order {order} takes {order} inputs, got {got}")]
    WrongInputCount { order: usize, got: usize },
    #[error("matrix is not orthonormal (max deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },
    #[error("degenerate: light parallel to central normal (center intensity {i0})")]
    DegenerateLight { i0: f64 },
    #[error("missing derivative rows for orders below {j}")]
    MissingLowerOrders { j: usize },
    #[error("expected {expected} third rows, got {got}")]
    RowCountMismatch { expected: usize, got: usize },
    #[error("row of order {j} must have {expected} entries, got {got}")]
    RowLengthMismatch { j: usize, expected: usize, got: usize },
    #[error("least-squares fit underdetermined: {samples} samples for {unknowns} coefficients")]
    Underdetermined { samples: usize, unknowns: usize },
    #[error("center intensity {i0} is outside the Lambertian range [-1, 1]")]
    InvalidIntensity { i0: f64 },
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("vectors are parallel: cannot build a tangent frame")]
    ParallelVectors,
    #[error("non-visible normal: cannot integrate as height field (min z component {min_z})")]
    NonVisibleNormal { min_z: f64 },
    #[error("direction must be unit length (norm {norm})")]
    NonUnitVector { norm: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid file: {0}")]
    InvalidFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by numerical degeneracy of the scene rather
    /// than by malformed input.
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            Error::DegenerateLight { .. }
                | Error::NonPositiveConstant { .. }
                | Error::ParallelVectors
                | Error::NonVisibleNormal { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
