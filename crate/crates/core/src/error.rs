use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown case tag `{0}`")]
    UnknownCase(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid hierarchy: {0}")]
    InvalidHierarchy(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("point {0:?} lies outside the computational domain")]
    OutsideDomain([f64; 2]),
    #[error("run aborted: t = {t} exceeded t_max = {t_max} before the stopping rule fired")]
    RunAborted { t: f64, t_max: f64 },
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
