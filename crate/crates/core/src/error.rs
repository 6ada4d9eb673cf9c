use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("steering is not pair-symmetric (delta_1 = delta_3, delta_2 = delta_4 required)")]
    AsymmetricSteering,
    #[error("wheel torques are not pair-antisymmetric (tau_3 = -tau_1, tau_4 = -tau_2 required)")]
    AsymmetricTorque,
    #[error("singular steering configuration: |det J_tau'| = {det:.3e}")]
    SingularConfiguration { det: f64 },
    #[error("rotational mass matrix is singular")]
    SingularMassMatrix,
    #[error("non-finite state at t = {t} s")]
    NonFiniteState { t: f64 },
    #[error("IMU history spans {have} s but the debounce window needs {need} s")]
    InsufficientHistory { have: f64, need: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
