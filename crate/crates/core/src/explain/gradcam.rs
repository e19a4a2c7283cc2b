use super::{ExplainError, Heatmap, Target};
use crate::imagecore::{BilinearResize, FloatImage};
use crate::nn::{ActivationRecord, BackwardMode, LayerKind, Model, NnError, Scalar, Tensor};

/// Index of the layer whose *input* is the Grad-CAM activation map: the output of
/// the last convolution, taken after its ReLU when one directly follows.
pub fn target_layer<T: Scalar>(model: &Model<T>) -> Result<usize, ExplainError> {
    let conv = model.last_conv().ok_or(ExplainError::NoConvLayer)?;
    match model.layers().get(conv + 1).map(|l| l.kind()) {
        Some(LayerKind::Relu) => Ok(conv + 2),
        _ => Ok(conv + 1),
    }
}

/// Channel weights and the activation map they weight, for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CamWeights<T: Scalar = f32> {
    /// `alpha[k]`: spatial mean of the target score's gradient on channel `k`.
    pub alpha: Vec<T>,
    /// Activations `[C, h, w]`.
    pub activations: Tensor<T>,
}

fn mapped<T>(r: Result<T, NnError>) -> Result<T, ExplainError> {
    r.map_err(|e| match e {
        NnError::StaleRecord => ExplainError::NoForwardRecord,
        e => ExplainError::Nn(e),
    })
}

fn weights_from_record<T: Scalar>(
    model: &Model<T>,
    record: &ActivationRecord<T>,
    target: Target,
) -> Result<CamWeights<T>, ExplainError> {
    let layer = target_layer(model)?;
    let a = record.activation(layer).ok_or(ExplainError::NoForwardRecord)?;
    let s = a.shape();
    if s.len() != 4 || s[0] != 1 {
        return Err(ExplainError::ShapeMismatch(format!("expected one sample, got {s:?}")));
    }
    let (c, hw) = (s[1], s[2] * s[3]);
    let grad = mapped(model.backward_logit(record, &target.sign(), layer, BackwardMode::Standard))?;
    let n = T::from_usize(hw).unwrap();
    let alpha = grad
        .data()
        .chunks(hw)
        .map(|g| g.iter().fold(T::zero(), |acc, &v| acc + v) / n)
        .collect();
    let activations = Tensor::new(vec![c, s[2], s[3]], a.data().to_vec())?;
    Ok(CamWeights { alpha, activations })
}

/// Grad-CAM channel weights for a `[1, C, H, W]` input.
pub fn grad_cam_weights<T: Scalar>(model: &Model<T>, input: &Tensor<T>, target: Target) -> Result<CamWeights<T>, ExplainError> {
    let layer = target_layer(model)?;
    let features = model.run_span(input, 0, layer)?;
    let (_, record) = model.forward_from(layer, features)?;
    weights_from_record(model, &record, target)
}

fn heatmap<T: Scalar>(model: &Model<T>, w: &CamWeights<T>) -> Result<Heatmap, ExplainError> {
    let s = w.activations.shape();
    let (hh, ww) = (s[1], s[2]);
    let mut cam = vec![T::zero(); hh * ww];
    for (k, &a) in w.alpha.iter().enumerate() {
        for (out, &v) in cam.iter_mut().zip(w.activations.item(k)) {
            *out += a * v;
        }
    }
    let cam: Vec<f32> = cam.iter().map(|&v| v.max(T::zero()).as_f64() as f32).collect();
    let [_, in_h, in_w] = model.input_shape();
    let up = FloatImage::gray(ww, hh, cam)
        .expect("dimensions match")
        .resize_bilinear(in_w, in_h)
        .into_data();
    let max = up.iter().copied().fold(0.0f32, f32::max);
    let values = if max > 0.0 { up.iter().map(|&v| (v / max).clamp(0.0, 1.0)).collect() } else { vec![0.0; up.len()] };
    Heatmap::new(in_w, in_h, values)
}

/// Grad-CAM from an existing forward record that covers the target layer.
pub fn grad_cam_from_record<T: Scalar>(model: &Model<T>, record: &ActivationRecord<T>, target: Target) -> Result<Heatmap, ExplainError> {
    let w = weights_from_record(model, record, target)?;
    heatmap(model, &w)
}

/// Grad-CAM for a `[1, C, H, W]` input tensor.
pub fn grad_cam_input<T: Scalar>(model: &Model<T>, input: &Tensor<T>, target: Target) -> Result<Heatmap, ExplainError> {
    let w = grad_cam_weights(model, input, target)?;
    heatmap(model, &w)
}

/// Grad-CAM heatmap at the input resolution.
///
/// The target score is the pre-sigmoid logit, negated for [`Target::Negative`]. The
/// map `ReLU(sum_k alpha_k A_k)` is upsampled bilinearly and divided by its maximum
/// (all zeros when the maximum is zero).
pub fn grad_cam(model: &Model, img: &FloatImage, target: Target) -> Result<Heatmap, ExplainError> {
    grad_cam_input(model, &super::guided::image_tensor(model, img)?, target)
}
