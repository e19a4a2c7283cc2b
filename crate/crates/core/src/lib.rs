//! Chest-CT slice classification toolkit.
//!
//! The crate is split along the pipeline:
//!
//! - [`imagecore`]: rasters, NIfTI-1 volumes, Hounsfield windowing, PNG I/O, resizing.
//! - [`preprocess`]: body cropping through binary morphology, exterior exclusion, augmentation.
//! - [`nn`]: a small CPU tensor/layer engine with exact backward passes, Adam, and training.
//! - [`explain`]: Grad-CAM, guided backpropagation and their renders.
//! - [`metrics`]: confusion matrix, scalar metrics, PR and ROC curves.
//! - [`dataset`]: manifests, stratified splitting and the synthetic phantom generator.
//!
//! Every randomized step draws from a seed derived with [`seed::derive`], so a whole
//! run is a deterministic function of one root seed.

pub mod dataset;
pub mod explain;
pub mod imagecore;
pub mod metrics;
pub mod nn;
pub mod preprocess;
pub mod seed;

pub use imagecore::{CtVolume, FloatImage, GrayImage8, HuWindow, RgbImage8};
pub use metrics::{ConfusionMatrix, EvalReport, ScoredSample};
pub use nn::{Model, Tensor};
pub use preprocess::{AugmentParams, BinaryMask, CropParams, Rect};
