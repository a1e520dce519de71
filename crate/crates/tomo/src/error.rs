use thiserror::Error;

/// Crate-wide error type. Variants map onto the CLI exit codes:
/// configuration problems exit 2, solver non-convergence exits 3 and
/// I/O failures exit 4.
#[derive(Debug, Error)]
pub enum TomoError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("solver did not converge: {0}")]
    Solver(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl TomoError {
    /// CLI exit code for this error kind.
    pub fn exit_code(&self) -> i32 {
        match self {
            TomoError::Config(_)
            | TomoError::Geometry(_)
            | TomoError::Domain(_)
            | TomoError::Shape(_)
            | TomoError::Input(_) => 2,
            TomoError::Solver(_) => 3,
            TomoError::Io(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, TomoError>;
