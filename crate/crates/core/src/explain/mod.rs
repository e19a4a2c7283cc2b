//! Gradient-based saliency: Grad-CAM, guided backpropagation, their product, and
//! renders for inspection.

mod gradcam;
mod guided;
mod render;

pub use self::gradcam::{grad_cam, grad_cam_from_record, grad_cam_input, grad_cam_weights, target_layer, CamWeights};
pub use self::guided::{guided_backprop, guided_backprop_from_record, guided_grad_cam};
pub use self::render::{colormap, enhance_green, explain_image, overlay, Explanation, DEFAULT_OVERLAY_ALPHA};

use crate::imagecore::GrayImage8;
use crate::nn::{NnError, Scalar, Tensor};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExplainError {
    #[error("model has no convolution layer")]
    NoConvLayer,
    #[error("no forward record covering the requested layers")]
    NoForwardRecord,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Class whose score is explained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Positive,
    Negative,
}

impl Target {
    /// The class predicted by probability `p` at `threshold`.
    pub fn predicted(p: f64, threshold: f64) -> Self {
        if p >= threshold {
            Target::Positive
        } else {
            Target::Negative
        }
    }

    fn sign<T: Scalar>(self) -> Tensor<T> {
        let s = match self {
            Target::Positive => T::one(),
            Target::Negative => -T::one(),
        };
        Tensor::full(vec![1], s)
    }
}

/// Class-localisation map with values in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    width: usize,
    height: usize,
    values: Vec<f32>,
}

impl Heatmap {
    pub fn new(width: usize, height: usize, values: Vec<f32>) -> Result<Self, ExplainError> {
        if values.len() != width * height {
            return Err(ExplainError::ShapeMismatch(format!(
                "{} values for a {width}x{height} heatmap",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(ExplainError::ShapeMismatch(format!("heatmap value {v} outside [0, 1]")));
        }
        Ok(Self { width, height, values })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn to_gray8(&self) -> GrayImage8 {
        to_gray8(self.width, self.height, &self.values)
    }
}

/// Signed per-pixel saliency with a `[0, 1]` render view.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    width: usize,
    height: usize,
    values: Vec<f32>,
    render: Vec<f32>,
}

impl SaliencyMap {
    /// Wraps signed values; the render view is `(v - min) / (max - min)`, or all
    /// zeros when the values are constant.
    pub fn from_values(width: usize, height: usize, values: Vec<f32>) -> Result<Self, ExplainError> {
        if values.len() != width * height {
            return Err(ExplainError::ShapeMismatch(format!(
                "{} values for a {width}x{height} saliency map",
                values.len()
            )));
        }
        let lo = values.iter().copied().fold(f32::INFINITY, f32::min);
        let hi = values.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let render = if hi > lo {
            let span = (hi - lo) as f64;
            values.iter().map(|&v| ((v - lo) as f64 / span) as f32).collect()
        } else {
            vec![0.0; values.len()]
        };
        Ok(Self {
            width,
            height,
            values,
            render,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn render(&self) -> &[f32] {
        &self.render
    }

    pub fn to_gray8(&self) -> GrayImage8 {
        to_gray8(self.width, self.height, &self.render)
    }
}

fn to_gray8(width: usize, height: usize, v: &[f32]) -> GrayImage8 {
    GrayImage8::from_fn(width, height, |x, y| crate::imagecore::quantize_u8(255.0 * v[y * width + x] as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_is_min_max() {
        let m = SaliencyMap::from_values(3, 1, vec![-2.0, 0.0, 2.0]).unwrap();
        assert_eq!(m.render(), &[0.0, 0.5, 1.0]);
        let c = SaliencyMap::from_values(2, 1, vec![3.0, 3.0]).unwrap();
        assert_eq!(c.render(), &[0.0, 0.0]);
    }

    #[test]
    fn heatmap_range_checked() {
        assert!(Heatmap::new(1, 1, vec![1.5]).is_err());
        assert!(Heatmap::new(2, 1, vec![0.5]).is_err());
    }

    #[test]
    fn predicted_target_uses_ge() {
        assert_eq!(Target::predicted(0.5, 0.5), Target::Positive);
        assert_eq!(Target::predicted(0.49, 0.5), Target::Negative);
    }
}
