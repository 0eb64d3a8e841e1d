//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation (non-finite input,
    /// empty interval, zero path count, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Requested builtin generator does not exist.
    #[error("unknown builtin generator `{0}`")]
    UnknownBuiltin(String),

    /// The generator is not globally integrable, so the state transform and
    /// its quasi-isometry constants are undefined.
    #[error("generator is not globally integrable (L1 norm = {l1})")]
    NotIntegrable { l1: f64 },

    /// The regression design matrix is numerically singular.
    #[error("ill-conditioned regression basis at step {step}: condition estimate {condition:.3e}")]
    IllConditionedBasis { step: usize, condition: f64 },

    /// The backward step is too coarse for the per-step fixed point to
    /// contract; rerun with at least `required_steps` time steps.
    #[error("non-contractive backward step (estimate {contraction:.3}); refine to >= {required_steps} steps")]
    RefineGrid {
        contraction: f64,
        required_steps: usize,
    },

    /// A simulated state became non-finite.
    #[error("simulation blow-up: non-finite state on path {path} at step {step}")]
    SimulationBlowup { path: usize, step: usize },

    /// An internal consistency assertion failed (e.g. the domination
    /// sandwich was violated beyond tolerance). This is a test-failure
    /// signal, not a recoverable condition.
    #[error("solver inconsistency: {0}")]
    SolverInconsistency(String),

    /// Two solutions that must share an ensemble do not.
    #[error("mismatched ensembles: {0}")]
    MismatchedEnsembles(String),

    /// A numeric routine failed (overflow, failed convergence, ...).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Configuration rejected before any computation.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
