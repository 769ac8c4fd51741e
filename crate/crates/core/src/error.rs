use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("flux bias {phi_ratio} gives a non-positive SQUID inductance (cos(pi*phi) = {cosine})")]
    InvalidFlux { phi_ratio: f64, cosine: f64 },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("negative rate for `{name}`: {value}")]
    NegativeRate { name: String, value: f64 },

    #[error("all bath couplings are zero; merged occupancy undefined")]
    UndefinedOccupancy,

    #[error("observable is not Hermitian (max deviation {deviation:e})")]
    NonHermitian { deviation: f64 },

    #[error("target state is not normalized (norm^2 = {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },

    #[error("step-size failure at t = {time:e} s (dt = {dt:e} s): {diagnostic}")]
    StepSize { time: f64, dt: f64, diagnostic: String },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("steady state is not determined: {0}")]
    SteadyState(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("fit did not converge after {iterations} iterations (residual norm {residual:e})")]
    FitDiverged { iterations: usize, residual: f64 },

    #[error("fit input rejected: {0}")]
    FitInput(String),

    #[error("no spectral peak above the noise floor")]
    NoSpectralPeak,
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
