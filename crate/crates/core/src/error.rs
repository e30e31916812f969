use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("unknown spectrum kind `{0}`")]
    UnknownSpectrum(String),

    #[error("degenerate diffusion: right inverse needs a positive floor, got {floor}")]
    DegenerateDiffusion { floor: f64 },

    #[error("infeasible coupling exponents: {0}")]
    Infeasible(String),

    #[error("feedback gain {gain} with dt {dt} gives gain*dt = {product:.3} > 0.1")]
    StiffFeedback { gain: f64, dt: f64, product: f64 },

    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("experiment refused: {0}")]
    Refused(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
