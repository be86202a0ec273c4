use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A physical or configuration parameter is outside its valid domain.
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("no root for theta = {theta} on Ka in [{lo}, {hi}]")]
    NoRoot { theta: f64, lo: f64, hi: f64 },

    #[error("distance {distance} m outside sensing window [{start}, {end})")]
    OutsideWindow { distance: f64, start: f64, end: f64 },

    #[error("depth {depth} m exceeds profile thickness {total} m")]
    DepthExceedsProfile { depth: f64, total: f64 },

    #[error("capture of {frames}x{bins} samples exceeds memory cap of {cap} bytes")]
    CaptureTooLarge {
        frames: usize,
        bins: usize,
        cap: usize,
    },

    #[error("empty capture: {0}")]
    EmptyCapture(String),

    #[error("frequency {freq} Hz is not below {limit} Hz")]
    AboveNyquist { freq: f64, limit: f64 },

    #[error("detection window is empty")]
    EmptyWindow,

    #[error("tag-frequency vector is all zero")]
    ZeroVector,

    #[error("no surface echo")]
    NoSurfaceEcho,

    #[error("negative delta ToF {delta_tof:e} s beyond tolerance {tolerance:e} s")]
    NegativeDelta { delta_tof: f64, tolerance: f64 },

    #[error("insufficient points: need at least {needed}, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("rank-deficient calibration system")]
    RankDeficient,

    #[error("corrupt capture: {0}")]
    CorruptCapture(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub(crate) fn ensure_finite(field: &str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::invalid(
            field,
            format!("must be finite, got {value}"),
        ))
    }
}
