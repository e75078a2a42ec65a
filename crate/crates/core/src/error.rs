use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A parameter or configuration failed validation. The first field names it.
    #[error("invalid {0}: {1}")]
    Invalid(&'static str, String),
    #[error("integrated tail undefined: {0}")]
    IntegratedTailUndefined(String),
    #[error("transform undefined at s = {s}: {reason}")]
    TransformUndefined { s: f64, reason: String },
    #[error("MGF divergent at theta = {theta} (finite only below {theta_max})")]
    MgfDivergent { theta: f64, theta_max: f64 },
    #[error("no interior minimum: {0}")]
    NoInteriorMinimum(String),
    #[error("no travelling wave below c* = {c_star} (requested c = {c})")]
    NoWaveBelowCritical { c: f64, c_star: f64 },
    #[error("root finding failed: {0}")]
    RootNotFound(String),
    #[error("work budget exceeded: {needed} > {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("insufficient tail resolution: {0}")]
    InsufficientTailResolution(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

impl Error {
    /// Numerical failures (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::Invalid(..))
    }
}

pub(crate) fn invalid(field: &'static str, msg: impl Into<String>) -> Error {
    Error::Invalid(field, msg.into())
}
