use anchorplan_nn::NnError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("trajectory horizon mismatch: {a} vs {b}")]
    HorizonMismatch { a: usize, b: usize },
    #[error("flat trajectory length {len} is not an even number of coordinates")]
    OddFlatLength { len: usize },
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },
    #[error("scenario template {template} infeasible after {attempts} attempts")]
    TemplateInfeasible {
        template: &'static str,
        attempts: usize,
    },
    #[error("invalid scenario {id}: {reason}")]
    InvalidScenario { id: String, reason: String },
    #[error("k-means needs at least k={k} points, got {n}")]
    TooFewPoints { n: usize, k: usize },
    #[error("anchor count mismatch: expected {expected}, got {got}")]
    AnchorCountMismatch { expected: usize, got: usize },
    #[error("empty input to {context}")]
    EmptyInput { context: &'static str },
    #[error("diffusion timestep {t} outside [0, {max}]")]
    TimestepOutOfRange { t: usize, max: usize },
    #[error("score {value} outside [0, 1] for {context}")]
    ScoreOutOfRange { value: f64, context: &'static str },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
