//! Error type shared by all modules of the crate.

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("series did not converge: {0}")]
    NonConvergent(String),

    #[error("overflow in series evaluation: {0}")]
    Overflow(String),

    #[error("argument within {radius:e} of a pole ({what})")]
    NearSingular { what: String, radius: f64 },

    #[error("quadrature did not converge: {0}")]
    NonConverged(String),

    #[error("pole order at expansion point is higher than one: {0}")]
    PoleOrderTooHigh(String),

    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("matrix expected to be rank one has sigma2/sigma1 = {ratio:e}")]
    RankDeficiencyViolation { ratio: f64 },

    #[error("dynamical parameters required but missing: {0}")]
    MissingDynamical(String),

    #[error("collision at t = {time}: particles {pair:?} closer than exclusion radius")]
    CollisionDetected { time: f64, pair: (usize, usize) },

    #[error("integrator step size underflow at t = {0}")]
    StepUnderflow(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid model specification: {0}")]
    InvalidSpec(String),

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("configuration error: {0}")]
    Config(String),
}
