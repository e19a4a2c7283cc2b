//! Body cropping, exterior exclusion and training-time augmentation.
//!
//! The crop chain is: Gaussian smoothing, threshold to a binary mask, binary opening
//! with a square structuring element, then the tight bounding box of the largest
//! connected component, applied to the original (unsmoothed) image.

mod augment;
mod components;
mod crop;
mod morphology;
mod smooth;

pub use augment::{augment, flip_horizontal, AugmentParams};
pub use components::{largest_component, largest_component_bbox, Connectivity, Rect};
pub use crop::{auto_body_crop, body_mask, exterior_exclusion, CropOutcome};
pub use morphology::{binary_open, dilate, erode, threshold_binary, BinaryMask};
pub use smooth::gaussian_smooth;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PreprocessError {
    #[error("mask has no foreground pixels")]
    EmptyMask,
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
}

/// Parameters of the body-crop chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CropParams {
    pub gaussian_sigma: f64,
    pub threshold: u8,
    /// Side of the square structuring element; odd and at least 3.
    pub structuring_element: usize,
    pub opening_iterations: usize,
    pub connectivity: Connectivity,
}

impl Default for CropParams {
    fn default() -> Self {
        Self {
            gaussian_sigma: 2.0,
            threshold: 25,
            structuring_element: 5,
            opening_iterations: 1,
            connectivity: Connectivity::Eight,
        }
    }
}

impl CropParams {
    pub fn validate(&self) -> Result<(), PreprocessError> {
        let bad = |m: &str| Err(PreprocessError::InvalidParams(m.to_string()));
        if !(self.gaussian_sigma > 0.0 && self.gaussian_sigma.is_finite()) {
            return bad("gaussian_sigma must be positive");
        }
        if !(1..=254).contains(&self.threshold) {
            return bad("threshold must lie in [1, 254]");
        }
        if self.structuring_element < 3 || self.structuring_element.is_multiple_of(2) {
            return bad("structuring_element must be odd and >= 3");
        }
        Ok(())
    }
}
