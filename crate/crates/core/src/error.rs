use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A user-supplied parameter violates its documented range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The requested field lies outside the regime where a unique running
    /// cycle exists (for instance `E1 <= M`).
    #[error("out of regime: {0}")]
    OutOfRegime(String),

    /// The cycle ODE `dv/dx = -gamma + (E - U'(x)) / v` hit the velocity floor.
    #[error("singular phase flow: v = {velocity:.3e} at x = {position:.6} fell below the floor {floor:.1e}")]
    SingularFlow {
        position: f64,
        velocity: f64,
        floor: f64,
    },

    #[error("fixed-point iteration did not converge after {iterations} iterations (last gap {gap:.3e})")]
    NoConvergence { iterations: usize, gap: f64 },

    #[error("integration failed at t = {time:.6}: {reason}")]
    Integration { time: f64, reason: String },

    /// A trajectory of an ensemble failed; identifies the offending draw.
    #[error("sample {index} (x0 = {x0:.6}, v0 = {v0:.6}): {source}")]
    Sample {
        index: usize,
        x0: f64,
        v0: f64,
        #[source]
        source: Box<Error>,
    },

    /// A quantity that must vanish in exact arithmetic exceeded its tolerance.
    #[error("numerical consistency check failed: {0}")]
    NumericalConsistency(String),

    #[error("tabulated potential: {0}")]
    Table(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

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
