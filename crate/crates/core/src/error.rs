use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A point, cube or box lies outside the region an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// An integer label or multi-index is outside its admissible range.
    #[error("range error: {0}")]
    Range(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported mode: {0}")]
    UnsupportedMode(String),

    #[error("parse error at line {line}, offset {offset}: {message}")]
    Parse {
        line: usize,
        offset: usize,
        message: String,
    },

    #[error("decoder fit failed at level {level}: best achieved error {achieved_eps:e} (requested {requested_eps:e})")]
    Fit {
        level: usize,
        achieved_eps: f64,
        requested_eps: f64,
        /// Grades completed before the failing level, serialized as a net bundle.
        partial: Option<Box<crate::multigrade::MultigradeNet>>,
    },

    #[error("two-sine fit exhausted its budget: best achieved error {:e} (requested {:e})", .0.best.achieved_eps, .0.requested_eps)]
    DecoderFit(Box<crate::decoder::FitFailure>),

    #[error(
        "no admissible delta: smallest tried {smallest_delta:e} left margin {residual_margin:e}"
    )]
    DeltaExhausted {
        smallest_delta: f64,
        residual_margin: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
