use super::{ExplainError, Heatmap, SaliencyMap, Target};
use crate::imagecore::FloatImage;
use crate::nn::{ActivationRecord, BackwardMode, Model, NnError, Scalar, Tensor};

pub(super) fn image_tensor(model: &Model, img: &FloatImage) -> Result<Tensor, ExplainError> {
    let [c, h, w] = model.input_shape();
    if img.channels() != c || img.height() != h || img.width() != w {
        return Err(ExplainError::ShapeMismatch(format!(
            "image {}x{}x{} does not match model input {c}x{h}x{w}",
            img.channels(),
            img.height(),
            img.width()
        )));
    }
    let mut data = Vec::with_capacity(c * h * w);
    for ch in 0..c {
        data.extend(img.data().iter().skip(ch).step_by(c));
    }
    Ok(Tensor::new(vec![1, c, h, w], data)?)
}

/// Guided backpropagation from a full forward record of one sample.
///
/// Channels of multi-channel inputs are summed per pixel.
pub fn guided_backprop_from_record<T: Scalar>(
    model: &Model<T>,
    record: &ActivationRecord<T>,
    target: Target,
) -> Result<SaliencyMap, ExplainError> {
    if record.start() != 0 {
        return Err(ExplainError::NoForwardRecord);
    }
    let g = model
        .backward_logit(record, &target.sign(), 0, BackwardMode::Guided)
        .map_err(|e| match e {
            NnError::StaleRecord => ExplainError::NoForwardRecord,
            e => ExplainError::Nn(e),
        })?;
    let s = g.shape();
    if s[0] != 1 {
        return Err(ExplainError::ShapeMismatch(format!("expected one sample, got {s:?}")));
    }
    let (c, h, w) = (s[1], s[2], s[3]);
    let mut values = vec![0.0f64; h * w];
    for ch in 0..c {
        for (out, v) in values.iter_mut().zip(&g.data()[ch * h * w..(ch + 1) * h * w]) {
            *out += v.as_f64();
        }
    }
    SaliencyMap::from_values(w, h, values.into_iter().map(|v| v as f32).collect())
}

/// Input-pixel gradient of the target logit with ReLUs passing only positive
/// gradients at positively activated units.
pub fn guided_backprop(model: &Model, img: &FloatImage, target: Target) -> Result<SaliencyMap, ExplainError> {
    let (_, record) = model.forward(&image_tensor(model, img)?)?;
    guided_backprop_from_record(model, &record, target)
}

/// Element-wise product of a heatmap with a saliency render.
pub fn guided_grad_cam(heatmap: &Heatmap, saliency: &SaliencyMap) -> Result<SaliencyMap, ExplainError> {
    if (heatmap.width(), heatmap.height()) != (saliency.width(), saliency.height()) {
        return Err(ExplainError::ShapeMismatch(format!(
            "heatmap {}x{} vs saliency {}x{}",
            heatmap.width(),
            heatmap.height(),
            saliency.width(),
            saliency.height()
        )));
    }
    let values: Vec<f32> = heatmap.values().iter().zip(saliency.render()).map(|(h, s)| h * s).collect();
    Ok(SaliencyMap {
        width: heatmap.width(),
        height: heatmap.height(),
        render: values.clone(),
        values,
    })
}
