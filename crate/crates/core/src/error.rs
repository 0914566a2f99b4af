use thiserror::Error;

/// Errors produced across the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of its valid range.
    #[error("configuration error: {0}")]
    Config(String),

    /// No waypoint sequence can enter the scene from the bottom edge.
    #[error("no traversable corridor wide enough for the footprint")]
    NoTraversableCorridor,

    /// Rendering kept failing the proposal filters.
    #[error("negative proposal rejected after {retries} retries")]
    ProposalRejected { retries: usize },

    /// A region of interest does not fit inside the scene.
    #[error("region ({row}, {col}, {height}x{width}) is outside a {scene_height}x{scene_width} scene")]
    OutOfBounds {
        row: usize,
        col: usize,
        height: usize,
        width: usize,
        scene_height: usize,
        scene_width: usize,
    },

    #[error("feature set is empty")]
    EmptyFeatureSet,

    #[error("positive set needs at least two samples, got {0}")]
    DegeneratePositiveSet(usize),

    #[error("negative set is empty")]
    EmptyNegativeSet,

    #[error("ground truth contains a single class")]
    SingleClassGroundTruth,

    #[error("union of negative masks is empty")]
    EmptyNegativeRegion,

    /// A loss term evaluated to NaN or infinity.
    #[error("non-finite loss in term `{term}` (epoch {epoch}, step {step}): {breakdown}")]
    NonFiniteLoss {
        term: String,
        epoch: usize,
        step: usize,
        breakdown: String,
    },

    /// Malformed binary container, checkpoint, or CSV.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
