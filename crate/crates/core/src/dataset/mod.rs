//! Labelled image manifests, stratified splitting, the synthetic phantom generator
//! and the image sets fed to training.

mod imageset;
mod manifest;
mod phantom;
mod split;

pub use self::imageset::ImageSet;
pub use self::manifest::{read_manifest, write_manifest, Manifest, ManifestRow, Split};
pub use self::phantom::{generate_phantoms, render_phantom, Ellipse, Phantom, PhantomSpec};
pub use self::split::{split_manifest, SplitRatios};

use std::path::Path;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DatasetError {
    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: {message}")]
    Csv { path: String, message: String },
    #[error("manifest row {row}: label {value:?} is not 0 or 1")]
    BadLabel { row: usize, value: String },
    #[error("manifest row {row}: duplicate path {path}")]
    DuplicatePath { row: usize, path: String },
    #[error("manifest row {row}: file {path} does not exist")]
    MissingFile { row: usize, path: String },
    #[error("need at least 10 rows to split, got {0}")]
    TooFewSamples(usize),
    #[error("both classes must be present")]
    OneClassOnly,
    #[error("invalid split ratios: {0}")]
    InvalidRatios(String),
    #[error("invalid phantom spec: {0}")]
    InvalidSpec(String),
    #[error("image {path}: {message}")]
    Image { path: String, message: String },
}

impl DatasetError {
    pub(crate) fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        DatasetError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}
