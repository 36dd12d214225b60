use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no SEPs")]
    NoSeps,
    #[error("degenerate histogram")]
    DegenerateHistogram,
    #[error("massless region")]
    MasslessRegion,
    #[error("degenerate polygon (zero area)")]
    DegeneratePolygon,
    #[error("no ground truth")]
    NoGroundTruth,
    #[error("filter divergence: {0}")]
    FilterDivergence(String),
    #[error("shape mismatch at layer {layer}: {detail}")]
    LayerShape { layer: usize, detail: String },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("training diverged at iteration {iteration} (loss {loss})")]
    Divergence { iteration: usize, loss: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("field generation failed: {0}")]
    Placement(String),
    #[error("map merge did not converge after {0} passes")]
    MergeNoFixpoint(usize),
    #[error("empty landmark map")]
    EmptyMap,
    #[error("format error: {0}")]
    Format(String),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short stable identifier, used for machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NoSeps => "no_seps",
            Error::DegenerateHistogram => "degenerate_histogram",
            Error::MasslessRegion => "massless_region",
            Error::DegeneratePolygon => "degenerate_polygon",
            Error::NoGroundTruth => "no_ground_truth",
            Error::FilterDivergence(_) => "filter_divergence",
            Error::LayerShape { .. } => "layer_shape",
            Error::Shape(_) => "shape",
            Error::Divergence { .. } => "training_divergence",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Placement(_) => "placement",
            Error::MergeNoFixpoint(_) => "merge_no_fixpoint",
            Error::EmptyMap => "empty_map",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
