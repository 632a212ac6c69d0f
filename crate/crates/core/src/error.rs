use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mode {mode} for a tensor of order {order}")]
    InvalidMode { mode: usize, order: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("identifiability condition violated: {0}")]
    Identifiability(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("elevation unrecoverable: sin(phi) = {sin_phi:e} is below the floor")]
    ElevationUnrecoverable { sin_phi: f64 },

    #[error("numerical divergence: {0}")]
    Divergence(String),

    #[error("gain unrecoverable: only {usable} of {total} entries usable")]
    GainUnrecoverable { usable: usize, total: usize },

    #[error("reference has zero norm")]
    UndefinedReference,

    #[error("invalid file: {0}")]
    Format(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short stable code written to the `status` column of result files.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidMode { .. } => "invalid_mode",
            Error::Shape(_) => "shape",
            Error::Identifiability(_) => "identifiability",
            Error::Config(_) => "config",
            Error::Degenerate(_) => "degenerate",
            Error::ElevationUnrecoverable { .. } => "elevation_unrecoverable",
            Error::Divergence(_) => "divergence",
            Error::GainUnrecoverable { .. } => "gain_unrecoverable",
            Error::UndefinedReference => "undefined_reference",
            Error::Format(_) => "format",
            Error::Csv(_) => "csv",
            Error::Io(_) => "io",
        }
    }
}
