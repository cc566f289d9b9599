use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid layout: {0}")]
    Layout(String),
    #[error("step called on a terminal state")]
    Terminal,
}

#[derive(Debug, Error)]
pub enum WvfError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("layout is not part of the trained pool")]
    UnknownLayout,
    #[error("no pool layout contains a required goal")]
    NoLayout,
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Error)]
pub enum ChatError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("http status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("missing environment variable {0}")]
    MissingEnv(&'static str),
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Wvf(#[from] WvfError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Chat(#[from] ChatError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
