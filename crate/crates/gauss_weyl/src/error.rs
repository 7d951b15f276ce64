use thiserror::Error;

/// Error kinds shared by every module. The CLI maps them to exit codes 2, 3 and 4.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GwError {
    #[error("input error: {0}")]
    Input(String),
    #[error("numerical diagnostic failure: {0}")]
    Numerical(String),
    #[error("resource cap exceeded: {0}")]
    Resource(String),
}

impl GwError {
    pub fn exit_code(&self) -> i32 {
        match self {
            GwError::Input(_) => 2,
            GwError::Numerical(_) => 3,
            GwError::Resource(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, GwError>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(GwError::Input(msg.into()))
}

pub(crate) fn numerical<T>(msg: impl Into<String>) -> Result<T> {
    Err(GwError::Numerical(msg.into()))
}

pub(crate) fn resource<T>(msg: impl Into<String>) -> Result<T> {
    Err(GwError::Resource(msg.into()))
}
