use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid mask spec: {0}")]
    InvalidSpec(String),

    #[error("degenerate mask: {0}")]
    DegenerateMask(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    /// A non-finite value appeared inside an unrolled solver; usually the step size is too large.
    #[error("divergence: {0}")]
    Divergence(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Dimension(msg.into()))
}
