use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("material error: {0}")]
    Material(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("{method} did not converge in {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        method: String,
        iterations: usize,
        residual: f64,
    },

    #[error("CG breakdown at iteration {iteration}: curvature {curvature:e}; the ghost system matrix is not symmetric")]
    Breakdown { iteration: usize, curvature: f64 },

    #[error("refusing dense assembly of {unknowns} unknowns (cap {cap})")]
    TooLarge { unknowns: usize, cap: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
