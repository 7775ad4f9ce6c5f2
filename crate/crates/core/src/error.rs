use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input violated a documented precondition.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A denominator of a closed-form expression vanished.
    #[error("degenerate parameters: {0}")]
    Degenerate(String),

    #[error("undefined ratio: {0}")]
    UndefinedRatio(&'static str),

    /// The model is evaluated outside the range where its approximation holds.
    #[error("outside model validity: {0}")]
    Validity(String),

    #[error("singular denominator at omega = {omega} rad/s")]
    Singular { omega: f64 },

    #[error("integration failed at t = {t_last} s: {reason}")]
    Integration { t_last: f64, reason: String },

    #[error("rank-deficient fit; unidentifiable directions: {}", directions.join(", "))]
    RankDeficient { directions: Vec<String> },

    #[error("degenerate geometry: {0}")]
    Geometry(String),

    #[error("phase aliasing: |delta_omega| * dt = {0:.3} exceeds pi")]
    Aliasing(f64),

    #[error("saturation condition violated: {0}")]
    SaturationViolated(String),

    #[error("sanity check failed: {0}")]
    Sanity(String),

    #[error("not enough data: {0}")]
    InsufficientData(String),
}

pub(crate) fn ensure(cond: bool, name: &'static str, reason: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: reason.into(),
        })
    }
}
