use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The trajectory did not reach a stable, well-separated outcome by `t_end`.
    #[error("trajectory not committed at t_end = {t_end}")]
    NotCommitted { t_end: f64 },

    /// `z1 - kappa * z2` is exactly zero; the outcome is undefined.
    #[error("tie: z1 - kappa*z2 = 0 for z1 = {z1}, z2 = {z2}")]
    Tie { z1: f64, z2: f64 },

    #[error("round {round_index}: no committed outcome after {attempts} attempts")]
    CommitmentFailure { round_index: u64, attempts: u32 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("unknown adversary model `{name}` (known: {known})")]
    UnknownAdversary { name: String, known: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by the physics or integrator rather than bad input.
    pub fn is_physics(&self) -> bool {
        matches!(
            self,
            Error::NotCommitted { .. } | Error::Tie { .. } | Error::CommitmentFailure { .. }
        )
    }
}
