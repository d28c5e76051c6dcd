//! Crate-wide error type. `Defect` marks breaches of internal identities
//! that valid inputs can never trigger; callers surface it as an engine bug
//! rather than a user error.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unreadable input: {0}")]
    Parse(String),

    #[error("invalid space: {0}")]
    Space(String),

    #[error("measurability violation: {0}")]
    Measurability(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("martingale property fails: {0}")]
    NotMartingale(String),

    #[error("model assumption fails: {0}")]
    Assumption(String),

    #[error("precondition not met: {0}")]
    Precondition(String),

    #[error("internal identity breached: {0}")]
    Defect(String),
}

pub type Result<T> = std::result::Result<T, Error>;
