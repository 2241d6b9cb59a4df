use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A quantity left its mathematical domain (non-positive scale factor, zero mode, ...).
    #[error("domain error: {what} (value {value:e})")]
    Domain { what: String, value: f64 },

    /// Evaluation point outside a tabulated grid.
    #[error("eta = {eta} outside tabulated range [{lo}, {hi}]")]
    Range { eta: f64, lo: f64, hi: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid mode: {0}")]
    InvalidMode(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid integration request: {0}")]
    InvalidRequest(String),

    /// The adaptive step fell below the representable resolution at `eta`.
    #[error("step size underflow at eta = {eta} (h = {h:e})")]
    StepUnderflow { eta: f64, h: f64 },

    #[error("maximum number of steps ({max_steps}) exceeded at eta = {eta}")]
    MaxSteps { eta: f64, max_steps: usize },

    /// Quadrature refinement did not settle; carries the last two iterates of T00.
    #[error(
        "quadrature did not converge after {depth} refinements at eta = {eta}: \
         last T00 = {last:e}, previous T00 = {previous:e}, relative change {rel_change:e}"
    )]
    NonConvergence {
        depth: usize,
        eta: f64,
        last: f64,
        previous: f64,
        rel_change: f64,
    },
}

impl Error {
    pub(crate) fn domain(what: impl Into<String>, value: f64) -> Self {
        Error::Domain {
            what: what.into(),
            value,
        }
    }
}
