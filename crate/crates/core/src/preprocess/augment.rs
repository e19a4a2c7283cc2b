use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PreprocessError;
use crate::imagecore::FloatImage;

/// Random augmentation ranges. Angular and fractional ranges are symmetric (`±value`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentParams {
    pub rotate_deg: f64,
    pub shear_deg: f64,
    pub brightness_frac: f64,
    pub translate_frac: f64,
    pub zoom: [f64; 2],
    pub hflip_prob: f64,
    /// Probability that a training sample is passed through exterior exclusion first.
    pub exterior_exclusion_prob: f64,
    pub seed: u64,
}

impl Default for AugmentParams {
    fn default() -> Self {
        Self {
            rotate_deg: 15.0,
            shear_deg: 10.0,
            brightness_frac: 0.2,
            translate_frac: 0.1,
            zoom: [0.9, 1.1],
            hflip_prob: 0.5,
            exterior_exclusion_prob: 0.5,
            seed: 0,
        }
    }
}

impl AugmentParams {
    /// Parameters under which [`augment`] is the identity.
    pub fn identity() -> Self {
        Self {
            rotate_deg: 0.0,
            shear_deg: 0.0,
            brightness_frac: 0.0,
            translate_frac: 0.0,
            zoom: [1.0, 1.0],
            hflip_prob: 0.0,
            exterior_exclusion_prob: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), PreprocessError> {
        let ranges = [self.rotate_deg, self.shear_deg, self.brightness_frac, self.translate_frac];
        if ranges.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(PreprocessError::InvalidParams("augmentation ranges must be non-negative".into()));
        }
        if !(self.zoom[0] > 0.0 && self.zoom[0] <= self.zoom[1] && self.zoom[1].is_finite()) {
            return Err(PreprocessError::InvalidParams("zoom range must be positive and ordered".into()));
        }
        for p in [self.hflip_prob, self.exterior_exclusion_prob] {
            if !(0.0..=1.0).contains(&p) {
                return Err(PreprocessError::InvalidParams("probabilities must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Draw {
    rotate: f64,
    shear: f64,
    tx: f64,
    ty: f64,
    zoom: f64,
    flip: bool,
    brightness: f64,
}

fn symmetric(rng: &mut ChaCha8Rng, range: f64) -> f64 {
    range * (2.0 * rng.gen::<f64>() - 1.0)
}

impl Draw {
    // draws happen in a fixed order whatever the ranges are
    fn sample(params: &AugmentParams, rng: &mut ChaCha8Rng) -> Self {
        let rotate = symmetric(rng, params.rotate_deg).to_radians();
        let shear = symmetric(rng, params.shear_deg).to_radians();
        let tx = symmetric(rng, params.translate_frac);
        let ty = symmetric(rng, params.translate_frac);
        let u: f64 = rng.gen();
        let zoom = params.zoom[0] + (params.zoom[1] - params.zoom[0]) * u;
        let flip = rng.gen::<f64>() < params.hflip_prob;
        let brightness = symmetric(rng, params.brightness_frac);
        Self {
            rotate,
            shear,
            tx,
            ty,
            zoom,
            flip,
            brightness,
        }
    }
}

/// Mirrors a single-channel image left to right.
pub fn flip_horizontal(img: &FloatImage) -> FloatImage {
    let (w, h) = (img.width(), img.height());
    let ch = img.channels();
    let mut data = Vec::with_capacity(img.data().len());
    for y in 0..h {
        for x in (0..w).rev() {
            let i = (y * w + x) * ch;
            data.extend_from_slice(&img.data()[i..i + ch]);
        }
    }
    FloatImage::new(w, h, ch, data).expect("dims preserved")
}

fn affine(img: &FloatImage, d: &Draw) -> FloatImage {
    let (w, h) = (img.width(), img.height());
    // forward linear part: rotation * shear * zoom
    let (s, c) = d.rotate.sin_cos();
    let k = d.shear.tan();
    let z = d.zoom;
    let a = [[c * z, (c * k - s) * z], [s * z, (s * k + c) * z]];
    let (tx, ty) = (d.tx * w as f64, d.ty * h as f64);
    if a == [[1.0, 0.0], [0.0, 1.0]] && tx == 0.0 && ty == 0.0 {
        return img.clone();
    }
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let inv = [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]];
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let fill = img.mean() as f64;
    let src = img.data();
    let at = |x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            fill
        } else {
            src[y as usize * w + x as usize] as f64
        }
    };
    let mut out = Vec::with_capacity(w * h);
    for oy in 0..h {
        for ox in 0..w {
            let (dx, dy) = (ox as f64 - cx - tx, oy as f64 - cy - ty);
            let sx = inv[0][0] * dx + inv[0][1] * dy + cx;
            let sy = inv[1][0] * dx + inv[1][1] * dy + cy;
            if sx <= -1.0 || sy <= -1.0 || sx >= w as f64 || sy >= h as f64 {
                out.push(fill as f32);
                continue;
            }
            let (x0, y0) = (sx.floor(), sy.floor());
            let (fx, fy) = (sx - x0, sy - y0);
            let (x0, y0) = (x0 as isize, y0 as isize);
            let top = at(x0, y0) * (1.0 - fx) + at(x0 + 1, y0) * fx;
            let bot = at(x0, y0 + 1) * (1.0 - fx) + at(x0 + 1, y0 + 1) * fx;
            out.push((top * (1.0 - fy) + bot * fy) as f32);
        }
    }
    FloatImage::gray(w, h, out).expect("dims preserved")
}

/// Applies one random affine transform, optional horizontal flip and a brightness shift.
///
/// The draw is a pure function of `(params.seed, sample)`. Out-of-frame pixels take
/// the input's mean intensity, and results are clamped to `[0, 1]`.
pub fn augment(img: &FloatImage, params: &AugmentParams, sample: u64) -> FloatImage {
    assert_eq!(img.channels(), 1, "augment expects a single-channel image");
    let mut rng = ChaCha8Rng::seed_from_u64(crate::seed::derive(params.seed, "augment", sample));
    let d = Draw::sample(params, &mut rng);
    let mut out = affine(img, &d);
    if d.flip {
        out = flip_horizontal(&out);
    }
    if d.brightness != 0.0 {
        let delta = d.brightness as f32;
        out.data_mut().iter_mut().for_each(|v| *v = (*v + delta).clamp(0.0, 1.0));
    }
    out
}
