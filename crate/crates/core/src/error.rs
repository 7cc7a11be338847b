use thiserror::Error;

use crate::physics::ZeemanState;
use crate::seqlang::SeqError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Zeeman state {level}({twice_m}/2)")]
    InvalidZeemanState { level: char, twice_m: i8 },

    #[error("transition {from} -> {to} violates the quadrupole selection rule |dm| <= 2")]
    SelectionRule { from: ZeemanState, to: ZeemanState },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state norm drifted to {norm}")]
    Normalization { norm: f64 },

    #[error("empty scan range")]
    EmptyScan,

    #[error("shelving pulse miscalibrated: noiseless transfer {fidelity}")]
    ShelvingMiscalibrated { fidelity: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Seq(#[from] SeqError),

    #[error("data file error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
