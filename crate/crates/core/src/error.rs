use thiserror::Error;

/// Errors shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid exponent: {0}")]
    InvalidExponent(String),

    /// The requested norm is identically zero outside the admissible regime.
    #[error(
        "exponents are outside the nontrivial regime ({0}); \
         the space is {{0}} unless 1 < p < t < r < inf or 1 < p <= t < r = inf"
    )]
    TrivialRegime(String),

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("cube (scale {scale}, corner {corner:?}) is not in the lattice family")]
    CubeOutsideFamily { scale: i32, corner: Vec<i64> },

    #[error("scale {scale} is outside the lattice range [{coarsest}, {finest}]")]
    ScaleOutsideFamily {
        scale: i32,
        coarsest: i32,
        finest: i32,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("translation offsets must be whole multiples of the cell size: {0}")]
    NonCellAligned(String),

    #[error("operation requires a periodic lattice")]
    PeriodicRequired,

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    /// The optimizer stalled; `best_value` is still a valid upper bound.
    #[error(
        "solver did not converge within {iterations} iterations (best feasible value {best_value})"
    )]
    NonConvergence { best_value: f64, iterations: usize },

    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;
