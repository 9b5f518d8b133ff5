use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of a closed-form expression.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("forest statistics unavailable: {0}")]
    Stats(String),
    /// Camera pose is invalid for the scene (e.g. inside the geometry).
    #[error("invalid camera pose: {0}")]
    Pose(String),
    /// A region was queried that no image footprint covers.
    #[error("coverage error: {0}")]
    Coverage(String),
    #[error("query error: {0}")]
    Query(String),
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("plot rendering failed: {0}")]
    Plot(String),
    #[error("malformed image: {0}")]
    Image(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
