use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid signal vector: {0}")]
    InvalidSignal(String),

    #[error("invalid weight matrix: {0}")]
    InvalidWeights(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid antigen label {0:?}")]
    InvalidLabel(String),

    #[error("cell {0} has already migrated")]
    CellMigrated(u64),

    #[error("cell {0} is still immature and cannot present")]
    CellImmature(u64),

    #[error("antigen store of cell {cell} is full ({capacity})")]
    CellStoreFull { cell: u64, capacity: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("statistics: {0}")]
    Stats(String),

    #[error("protocol: {0}")]
    Protocol(String),

    #[error("sink disconnected after {delivered} events, {undelivered} undelivered")]
    SinkDisconnected { delivered: usize, undelivered: usize },

    #[error("late event at t={timestamp}: second {second} already processed")]
    LateEvent { timestamp: f64, second: u64 },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
