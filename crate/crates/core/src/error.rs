use thiserror::Error;

use crate::exchange::PacketError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("topology: {0}")]
    Topology(String),

    #[error("partition: {0}")]
    Partition(String),

    #[error("dynamics: {0}")]
    Dynamics(String),

    #[error("delay {delay} outside queue horizon 1..={horizon}")]
    DelayOutOfRange { delay: u32, horizon: u32 },

    #[error(transparent)]
    Packet(#[from] PacketError),

    #[error("transport: {0}")]
    Transport(String),

    #[error("step skew: expected packets for step {expected}, observed step {observed}")]
    StepSkew { expected: u32, observed: u32 },

    #[error("node map: {0}")]
    NodeMap(String),

    #[error("instrumentation: {0}")]
    Instrumentation(String),

    #[error("energy: {0}")]
    Energy(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
