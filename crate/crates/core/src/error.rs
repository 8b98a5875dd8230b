use thiserror::Error;

/// Failure modes shared by every module.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SiltError {
    /// An input violated an operation's precondition. The message names the
    /// violated invariant.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// Adaptive quadrature exhausted its budget or could not reach the
    /// requested tolerance.
    #[error("quadrature failed: {0}")]
    Quadrature(String),
    /// The requested quantity is infinite for these parameters.
    #[error("divergent quantity: {0}")]
    Divergent(String),
    /// A Monte Carlo weight overflowed the floating-point range.
    #[error("weight overflow: {0}")]
    Overflow(String),
}

pub type Result<T> = std::result::Result<T, SiltError>;

/// Returns `Err(Precondition)` with `msg` unless `cond` holds.
pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(SiltError::Precondition(msg()))
    }
}
