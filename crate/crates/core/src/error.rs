use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("capacity exceeded: {what} needs {requested}, limit is {limit}")]
    Capacity {
        what: &'static str,
        requested: usize,
        limit: usize,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    /// A precondition on the value of an input was violated (normalisation,
    /// hermiticity, ...).
    #[error("contract violated: {0}")]
    Contract(String),

    #[error("outside domain: {0}")]
    Domain(String),

    #[error("norm drift {drift:.3e} in one step at t = {t}; reduce dt (currently {dt})")]
    StepSize { drift: f64, t: f64, dt: f64 },

    #[error("grid too small along axis `{axis}`: truncated mass {defect:.3e}")]
    GridTooSmall { axis: String, defect: f64 },

    #[error("wavefunction reaches within {margin} points of the periodic boundary; enlarge the grid")]
    WrapContamination { margin: usize },

    #[error("evaluation failed: {0}")]
    Evaluation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
