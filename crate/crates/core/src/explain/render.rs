use super::{grad_cam_from_record, guided_backprop_from_record, guided_grad_cam, ExplainError, Heatmap, SaliencyMap, Target};
use crate::imagecore::{quantize_u8, FloatImage, GrayImage8, RgbImage8};
use crate::nn::Model;

pub const DEFAULT_OVERLAY_ALPHA: f64 = 0.4;

/// Blue `(0, 0, 255)` at 0, green `(0, 255, 0)` at 0.5, red `(255, 0, 0)` at 1,
/// linear in between. Inputs are clamped to `[0, 1]`.
pub fn colormap(v: f64) -> [f64; 3] {
    let v = v.clamp(0.0, 1.0);
    if v <= 0.5 {
        let t = v / 0.5;
        [0.0, 255.0 * t, 255.0 * (1.0 - t)]
    } else {
        let t = (v - 0.5) / 0.5;
        [255.0 * t, 255.0 * (1.0 - t), 0.0]
    }
}

/// Blends the colormapped heatmap over the grayscale image:
/// `round((1 - alpha) * gray + alpha * colormap(h))` per channel.
pub fn overlay(img: &GrayImage8, heatmap: &Heatmap, alpha: f64) -> Result<RgbImage8, ExplainError> {
    if img.dims() != (heatmap.width(), heatmap.height()) {
        return Err(ExplainError::ShapeMismatch(format!(
            "image {}x{} vs heatmap {}x{}",
            img.width(),
            img.height(),
            heatmap.width(),
            heatmap.height()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(ExplainError::ShapeMismatch(format!("overlay alpha {alpha} outside [0, 1]")));
    }
    let mut out = Vec::with_capacity(img.data().len() * 3);
    for (&g, &h) in img.data().iter().zip(heatmap.values()) {
        let c = colormap(h as f64);
        for ch in c {
            out.push(quantize_u8((1.0 - alpha) * g as f64 + alpha * ch));
        }
    }
    Ok(RgbImage8::new(img.width(), img.height(), out).expect("dimensions match"))
}

/// Gray render with the green channel tripled and saturated at 255.
pub fn enhance_green(map: &SaliencyMap) -> RgbImage8 {
    let mut out = Vec::with_capacity(map.render().len() * 3);
    for &v in map.render() {
        let g = quantize_u8(255.0 * v as f64);
        out.extend([g, (3 * g as u16).min(255) as u8, g]);
    }
    RgbImage8::new(map.width(), map.height(), out).expect("dimensions match")
}

/// The five panels produced for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub probability: f32,
    pub target: Target,
    pub heatmap: Heatmap,
    pub guided: SaliencyMap,
    pub guided_cam: SaliencyMap,
    pub original: GrayImage8,
    pub overlay: RgbImage8,
    pub enhanced: RgbImage8,
}

/// Runs one forward pass and derives every saliency view for the predicted class
/// (`p >= threshold` is positive).
pub fn explain_image(model: &Model, img: &FloatImage, threshold: f64, alpha: f64) -> Result<Explanation, ExplainError> {
    let (fwd, record) = model.forward(&super::guided::image_tensor(model, img)?)?;
    let probability = fwd.probabilities.data()[0];
    let target = Target::predicted(probability as f64, threshold);
    let heatmap = grad_cam_from_record(model, &record, target)?;
    let guided = guided_backprop_from_record(model, &record, target)?;
    let guided_cam = guided_grad_cam(&heatmap, &guided)?;
    let original = img.to_gray8();
    let overlay = overlay(&original, &heatmap, alpha)?;
    let enhanced = enhance_green(&guided_cam);
    Ok(Explanation {
        probability,
        target,
        heatmap,
        guided,
        guided_cam,
        original,
        overlay,
        enhanced,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map_of(v: f32) -> SaliencyMap {
        let mut m = SaliencyMap::from_values(2, 1, vec![0.0, 1.0]).unwrap();
        m.render = vec![v, v];
        m
    }

    #[test]
    fn enhance_green_examples() {
        assert_eq!(enhance_green(&map_of(50.0 / 255.0)).pixel(0, 0), [50, 150, 50]);
        assert_eq!(enhance_green(&map_of(200.0 / 255.0)).pixel(0, 0), [200, 255, 200]);
        assert_eq!(enhance_green(&map_of(0.0)).pixel(0, 0), [0, 0, 0]);
    }

    #[test]
    fn colormap_stops() {
        assert_eq!(colormap(0.0), [0.0, 0.0, 255.0]);
        assert_eq!(colormap(0.5), [0.0, 255.0, 0.0]);
        assert_eq!(colormap(1.0), [255.0, 0.0, 0.0]);
        assert_eq!(colormap(0.25), [0.0, 127.5, 127.5]);
    }

    #[test]
    fn overlay_blend_identities() {
        let img = GrayImage8::from_fn(3, 2, |x, y| (x * 40 + y * 90) as u8);
        let h = Heatmap::new(3, 2, vec![0.0, 0.2, 0.5, 0.7, 0.9, 1.0]).unwrap();
        assert_eq!(overlay(&img, &h, 0.0).unwrap(), img.to_rgb());
        let pure = overlay(&img, &h, 1.0).unwrap();
        for (i, &v) in h.values().iter().enumerate() {
            let c = colormap(v as f64).map(quantize_u8);
            assert_eq!(pure.pixel(i % 3, i / 3), c);
        }
        let zeros = Heatmap::new(3, 2, vec![0.0; 6]).unwrap();
        let tinted = overlay(&img, &zeros, DEFAULT_OVERLAY_ALPHA).unwrap();
        for y in 0..2 {
            for x in 0..3 {
                let [r, g, b] = tinted.pixel(x, y);
                let gray = img.get(x, y);
                assert_eq!(r, quantize_u8(0.6 * gray as f64));
                assert_eq!(r, g);
                assert!(b >= r);
            }
        }
    }

    #[test]
    fn overlay_rejects_mismatch() {
        let img = GrayImage8::filled(3, 3, 0);
        let h = Heatmap::new(2, 2, vec![0.0; 4]).unwrap();
        assert!(matches!(overlay(&img, &h, 0.4), Err(ExplainError::ShapeMismatch(_))));
    }
}
