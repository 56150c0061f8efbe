use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Gf2Error {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("{name} = {value} is not a probability in [0, 1]")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("slot {slot} outside trace of length {len}")]
    SlotOutOfRange { slot: usize, len: usize },
    #[error("state trace of length {len} exhausted")]
    TraceExhausted { len: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegionError {
    #[error("parameters outside the region's regime: {0}")]
    Regime(String),
    #[error("region has no vertices")]
    Empty,
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("simulation configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Region(#[from] RegionError),
    /// A protocol reported success with wrong bits; always a bug.
    #[error("trial {trial}: decoder reported success with incorrect message {receiver}")]
    IncorrectDecode { trial: u64, receiver: u8 },
    #[error("csv output failed: {0}")]
    Csv(String),
}
