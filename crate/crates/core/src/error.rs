use thiserror::Error;

/// Errors raised by the numerical kernels and the approximation drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("maxvol: rank-deficient input, pivot column {column} is singular")]
    RankDeficient { column: usize },

    #[error("sylvester: spectra of A and -B overlap (min |a_i + b_j| = {gap:e})")]
    SpectralOverlap { gap: f64 },

    #[error("riccati: pair is not stabilizable ({stable} stable eigenvalues, need {needed})")]
    NotStabilizable { stable: usize, needed: usize },

    #[error("riccati: residual {residual:e} above bound {bound:e}")]
    RiccatiResidual { residual: f64, bound: f64 },

    #[error("generalized eigenproblem: mass matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("core {core}: ill-posed least-squares solve (min diagonal {min:e} vs max {max:e})")]
    IllPosedCore { core: usize, min: f64, max: f64 },

    #[error("oracle failed at {point:?}: {message}")]
    Oracle { point: Vec<f64>, message: String },

    #[error("newton iteration did not converge: residual {residual:e} after {iterations} iterations")]
    NewtonFailed { residual: f64, iterations: usize },

    #[error("pmp mesh too coarse: doubling the mesh changed V by {change:e}")]
    MeshTooCoarse { change: f64 },

    #[error("closed-loop trajectory diverged at t = {time}: |y| = {norm:e}")]
    Divergence { time: f64, norm: f64 },

    #[error("size guard: {0}")]
    TooLarge(String),

    #[error("file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
