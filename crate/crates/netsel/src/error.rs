//! Error type shared across the toolkit.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong when building models, simulating dynamics,
/// or running the selection pipelines.
#[derive(Debug, Error)]
pub enum Error {
    /// A vector or matrix did not have the size the operation requires.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A parameter failed validation at construction time.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A simulated state stopped being finite.
    #[error("state became non-finite at step {step}")]
    NonFiniteState { step: usize },

    /// The implicit step solver ran out of iterations.
    #[error("Newton iteration at step {step} stalled with residual {residual:.3e} after {iterations} iterations")]
    NewtonStall {
        step: usize,
        residual: f64,
        iterations: usize,
    },

    /// The implicit system matrix could not be factored.
    #[error("singular implicit system matrix at step {step}")]
    SingularSystem { step: usize },

    /// A concentration input violated the chemistry domain.
    #[error("negative concentration at species {index}: {value}")]
    NegativeConcentration { index: usize, value: f64 },

    /// An operation that needs at least one selected node got none.
    #[error("empty sensor selection")]
    EmptySelection,

    /// Exhaustive enumeration was refused because it is too large.
    #[error("enumeration would visit {count} selections, above the cap of {cap}")]
    EnumerationTooLarge { count: u128, cap: u128 },

    /// No binary selection satisfies the cardinality constraint.
    #[error("no feasible selection for N={n}, M_max={m_max} ({mode} mode)")]
    InfeasibleSelection {
        n: usize,
        m_max: usize,
        mode: crate::outputs::CardinalityMode,
    },

    /// The relative error metric is undefined for a zero reference.
    #[error("error metric undefined: reference state has zero norm")]
    ZeroNormReference,

    /// A cost function evaluated to NaN or infinity at the starting point.
    #[error("non-finite cost at the initial point")]
    NonFiniteCost,

    /// A pipeline phase failed; wraps the underlying error with the phase name.
    #[error("{phase} phase failed: {source}")]
    Phase {
        phase: &'static str,
        #[source]
        source: Box<Error>,
    },

    /// A model or data file could not be interpreted.
    #[error("model file: {0}")]
    ModelFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Tags an error with the pipeline phase it occurred in.
    pub(crate) fn in_phase(self, phase: &'static str) -> Error {
        Error::Phase {
            phase,
            source: Box::new(self),
        }
    }
}
