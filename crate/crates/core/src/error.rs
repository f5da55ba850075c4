use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Invalid configuration value (even kernel size, bad fractions, ...).
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch in {op}: expected {expected:?}, found {found:?}")]
    Shape {
        op: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },

    /// A precondition that is not about shapes, e.g. a stale forward cache.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),

    #[error("correlation undefined: input is constant")]
    UndefinedCorrelation,

    #[error("data error: {0}")]
    Data(String),
}
