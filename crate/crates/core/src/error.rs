use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("empty neighborhood")]
    EmptyNeighborhood,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("sample {index}: shape mismatch: {detail}")]
    SampleShape { index: usize, detail: String },

    #[error("sample {index}: asymmetric connectivity at timestep {timestep} ({row}, {col})")]
    AsymmetricConnectivity {
        index: usize,
        timestep: usize,
        row: usize,
        col: usize,
    },

    #[error("sample {index}: invalid connectivity: {detail}")]
    InvalidConnectivity { index: usize, detail: String },

    #[error("sample {index}: label {label} outside {{0, 1}}")]
    InvalidLabel { index: usize, label: u8 },

    #[error("corrupt file {path}: {detail}")]
    Corrupt { path: PathBuf, detail: String },

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },

    #[error("fold {fold} is missing class {class}")]
    MissingClass { fold: usize, class: u8 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
