use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate vector: norm {norm:e} below retraction tolerance {tol:e}")]
    DegenerateVector { norm: f64, tol: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value produced at t = {t}")]
    NonFinite { t: f64 },

    #[error("time step {dt:e} exceeds the verlet stability budget {limit:e}")]
    StabilityViolation { dt: f64, limit: f64 },

    #[error("field is off the sphere: | |u| - 1 | = {deviation:e} at point {point}")]
    OffSphere { deviation: f64, point: usize },

    #[error("plane vectors are not orthonormal (defect {defect:e})")]
    NonOrthonormalPlane { defect: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("snapshot format: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
