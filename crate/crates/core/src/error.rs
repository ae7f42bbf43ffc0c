use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("spectral parameter must lie in the upper half-plane, got Im z = {0}")]
    NotUpperHalfPlane(f64),
    #[error("degenerate root selection at z = {re}+{im}i: {count} roots in the upper half-plane")]
    DegenerateRoot { re: f64, im: f64, count: usize },
    #[error("density ladder did not stabilise at t = {t}: spread {spread} exceeds {tol}")]
    NonConvergence { t: f64, spread: f64, tol: f64 },
    #[error("fixed-point iteration did not converge after {0} iterations")]
    IterationLimit(usize),
    #[error("matrix is singular: {0}")]
    Singular(String),
    #[error("condition estimate {cond:e} exceeds ceiling {limit:e}")]
    IllConditioned { cond: f64, limit: f64 },
    #[error("argument {value} lies within {radius:e} of pole {pole}")]
    PoleProximity { value: String, pole: String, radius: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
