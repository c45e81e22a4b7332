use std::io;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid config: {field} {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("config parse error on line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },

    #[error("dimension mismatch in {op}: expected {expected}, found {found}")]
    DimensionMismatch {
        op: &'static str,
        expected: String,
        found: String,
    },

    #[error("label out of range: {label} is not below class count {classes}")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("class {0} has no samples")]
    EmptyClass(usize),

    #[error("class {class} has {available} samples, {requested} requested for training")]
    ClassTooSmall {
        class: usize,
        available: usize,
        requested: usize,
    },

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("linear system is singular: {0}")]
    Singular(&'static str),

    #[error("training diverged at iteration {iteration}: objective = {objective}")]
    Diverged { iteration: usize, objective: f64 },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dims(
        op: &'static str,
        expected: impl Into<String>,
        found: impl Into<String>,
    ) -> Self {
        Error::DimensionMismatch {
            op,
            expected: expected.into(),
            found: found.into(),
        }
    }

    /// Numerical failures (singular systems, divergence) as opposed to bad
    /// input or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Singular(_) | Error::Diverged { .. })
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Error::InvalidConfig { .. } | Error::ConfigParse { .. })
    }
}
