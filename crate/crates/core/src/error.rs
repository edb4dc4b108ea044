use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    Shape {
        op: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("empty input to {0}")]
    Empty(&'static str),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid config `{key}`: {msg}")]
    Config { key: String, msg: String },
    #[error("data error: {0}")]
    Data(String),
    #[error("could not corrupt triple ({head}, {relation}, {tail}) after {attempts} attempts")]
    CorruptionExhausted {
        head: u32,
        relation: u32,
        tail: u32,
        attempts: usize,
    },
    #[error("user {0} has interacted with every item")]
    NoNegativeItem(u32),
    #[error("unknown user {0}")]
    UnknownUser(u32),
    #[error("training diverged at epoch {epoch}, {phase} batch {batch}")]
    Diverged {
        epoch: usize,
        phase: &'static str,
        batch: usize,
    },
    #[error("no evaluable users")]
    NoEvaluableUsers,
}

impl Error {
    pub(crate) fn config(key: &str, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }
}
