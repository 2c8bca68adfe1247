use thiserror::Error;

/// Everything that can go wrong, from tensor algebra up to the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("singular tensor (det = {det:e})")]
    SingularTensor { det: f64 },

    /// An element's deformation map lost orientation: det(I + H) <= 0.
    #[error("element inverted (det(I+H) = {det:e}){context}")]
    ElementInverted { det: f64, context: String },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("linear solver breakdown: {0}")]
    SolverBreakdown(String),

    #[error("solver failed to converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("{0}")]
    Parse(String),

    #[error("{0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code contract: 1 for config problems, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) | Error::Validation(_) | Error::InvalidGeometry(_) => 1,
            _ => 2,
        }
    }

    /// Tag an element-local failure with the element index.
    pub(crate) fn with_element(self, t: usize) -> Error {
        match self {
            Error::ElementInverted { det, context } => Error::ElementInverted {
                det,
                context: format!("{context} (element {t})"),
            },
            e => e,
        }
    }

    /// Tag a failure with the step at which it happened.
    pub(crate) fn with_step(self, step: usize) -> Error {
        match self {
            Error::ElementInverted { det, context } => Error::ElementInverted {
                det,
                context: format!("{context} (step {step})"),
            },
            e => e,
        }
    }
}
