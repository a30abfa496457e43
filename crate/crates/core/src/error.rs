//! Error type shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed json in {path} (line {line}): {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid bounding box: width and height must be positive, got w={w} h={h}")]
    InvalidBox { w: f64, h: f64 },

    #[error("invalid sequence {id}: {message}")]
    InvalidSequence { id: String, message: String },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("empty patch: box does not overlap the image")]
    EmptyPatch,

    #[error("histogram bin count mismatch: {left} vs {right}")]
    BinMismatch { left: usize, right: usize },

    #[error("descriptor length mismatch: {left} vs {right}")]
    DescriptorLengthMismatch { left: usize, right: usize },

    #[error("empty descriptor")]
    EmptyDescriptor,

    #[error("out of bounds: target box leaves the image under every search shift")]
    OutOfBounds,

    #[error("engine requires images")]
    EngineRequiresImages,

    #[error("engine requires a score matrix")]
    EngineRequiresMatrix,

    #[error("engine requires ground truth")]
    EngineRequiresGroundTruth,

    #[error("frame index {frame} outside sequence of length {length}")]
    FrameOutOfRange { frame: usize, length: usize },

    #[error("tracklet span mismatch: {left} vs {right}")]
    SpanMismatch { left: usize, right: usize },

    #[error("empty bag")]
    EmptyBag,

    #[error("sequence length must be positive")]
    EmptySequence,

    #[error("no ground truth")]
    NoGroundTruth,

    #[error("empty training set")]
    EmptyTraining,

    #[error("person placement failed after {attempts} attempts")]
    PlacementFailed { attempts: usize },

    #[error("missing frames: {}", paths_list(.0))]
    MissingFrames(Vec<PathBuf>),

    #[error("image error on {path}: {message}")]
    Image { path: PathBuf, message: String },
}

fn paths_list(paths: &[PathBuf]) -> String {
    paths
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
