use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error("invariant violated: {0}")]
    Physics(String),
    #[error(transparent)]
    Core(#[from] cavity_ef::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// Process exit status: 2 for bad configuration, 3 for a violated
    /// physical invariant, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Physics(_) => 3,
            RunError::Core(e) if e.is_physics_violation() => 3,
            RunError::Core(_) => 2,
            RunError::Io(_) => 1,
        }
    }
}

impl From<toml::de::Error> for RunError {
    fn from(e: toml::de::Error) -> Self {
        RunError::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, RunError>;
