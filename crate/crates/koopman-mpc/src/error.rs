//! Crate-wide error type.

/// Errors produced anywhere in the identification / control pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// The ground-truth vector field was evaluated outside its domain
    /// (e.g. a negative tank level under the square root).
    #[error("integration domain error: {0}")]
    Domain(String),

    #[error("empty data set")]
    EmptyData,

    #[error("expected {expected} snapshot sets (one per basis input), got {got}")]
    DatasetCount { expected: usize, got: usize },

    #[error("basis input {index} is not the unit vector e_{index} in transformed coordinates")]
    BadBasisInput { index: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("surrogate rollout produced a non-finite state at prediction step {step}")]
    NonFiniteRollout { step: usize },

    #[error("observer updated before any measurement/input pair was recorded")]
    ObserverNotPrimed,

    #[error("reference calculator did not converge after {iters} iterations (residual {residual:.3e})")]
    ReferenceNoConvergence { iters: usize, residual: f64 },

    #[error("singular Jacobian in the reference calculation")]
    SingularJacobian,

    #[error("computed reference input lies outside the admissible input box (component {component}: {value})")]
    ReferenceOutsideBox { component: usize, value: f64 },

    #[error("closed-loop failure at step {step}: {source}")]
    ClosedLoop {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("model file error: {0}")]
    ModelFile(String),
}

impl Error {
    /// Tag an error with the closed-loop step at which it occurred.
    pub fn at_step(self, step: usize) -> Error {
        Error::ClosedLoop {
            step,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
