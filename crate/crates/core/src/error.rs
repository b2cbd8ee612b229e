use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("metric is not Lorentzian at (t={t}, y={y}): {detail}")]
    NonLorentzian { t: f64, y: f64, detail: String },

    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),

    #[error("grid is not symmetric under s -> -s (node {index}: {left} vs {right})")]
    GridAsymmetry { index: usize, left: f64, right: f64 },

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    /// The discrete operator has a (near) kernel; `near_null` is a unit vector spanning it.
    #[error("singular system (pivot {pivot:.3e})")]
    SingularSystem { pivot: f64, near_null: Vec<Complex64> },

    #[error("region mismatch: {0}")]
    RegionMismatch(String),

    #[error("degenerate normal: |k^ss| = {0:.3e}")]
    DegenerateNormal(f64),

    #[error("CFL condition violated: {0}")]
    CflViolation(String),

    #[error("time {t} outside the evolution window |t| <= {window}")]
    WindowExceeded { t: f64, window: f64 },

    #[error("coincident points s1 = s2 = {0}")]
    CoincidentPoints(f64),

    #[error("not stationary: {0}")]
    NotStationary(String),

    #[error("boundary rows do not share a grid: {0}")]
    BoundaryMismatch(String),

    #[error("extrapolation does not converge: {0}")]
    NonConvergent(String),

    #[error("mode mismatch: {0}")]
    ModeMismatch(String),

    #[error("cutoff normal derivative at s=0 is {0:.3e}")]
    CutoffViolation(f64),

    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config { key: key.into(), msg: msg.into() }
    }
}
