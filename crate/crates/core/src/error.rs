use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("non-finite deputy state {0:?}")]
    NonFiniteState([f64; 6]),
    #[error("invalid dynamics parameter `{key}` = {value} (must be finite and positive)")]
    InvalidParam { key: &'static str, value: f64 },
}

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("requested point count must be at least 1")]
    ZeroPointCount,
    #[error("chief radius must be finite and positive, got {0}")]
    InvalidRadius(f64),
    #[error("agent at distance {distance} m is not outside the chief (radius {radius} m)")]
    AgentInsideChief { distance: f64, radius: f64 },
}

#[derive(Debug, Error, PartialEq)]
pub enum IlluminationError {
    #[error("ray direction has zero length")]
    ZeroDirection,
}

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("step called on a finished episode")]
    EpisodeFinished,
    #[error("invalid episode config `{key}`: {reason}")]
    InvalidConfig { key: &'static str, reason: String },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("observation has length {0}, expected {1}")]
    ObservationShape(usize, usize),
    #[error("observation contains non-finite values")]
    NonFiniteObservation,
    #[error("non-finite loss during update (epoch {epoch}, minibatch {minibatch}): {stats}")]
    NonFiniteLoss {
        epoch: usize,
        minibatch: usize,
        stats: String,
    },
    #[error("rollout batch is malformed: {0}")]
    MalformedBatch(String),
    #[error("invalid training config `{key}`: {reason}")]
    InvalidConfig { key: &'static str, reason: String },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint is not valid json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported checkpoint format `{found}` version {version} (expected `{expected}` version {expected_version})")]
    Version {
        found: String,
        version: u32,
        expected: &'static str,
        expected_version: u32,
    },
    #[error("checkpoint tensor `{name}` has shape {found:?}, expected {expected:?}")]
    Shape {
        name: String,
        found: Vec<usize>,
        expected: Vec<usize>,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("statistic needs at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("confidence level must be in (0, 1), got {0}")]
    InvalidLevel(f64),
    #[error("resample count must be positive")]
    ZeroResamples,
}
