use std::io;

use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ORACLE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_STATS: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] husimi_lab::Error),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    /// 2 for bad input, 3 when the statistics cannot be trusted.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(husimi_lab::Error::UnderfilledBins { .. } | husimi_lab::Error::EmptyLog) => EXIT_STATS,
            _ => EXIT_INPUT,
        }
    }
}
