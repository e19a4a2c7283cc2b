use crate::imagecore::{quantize_u8, GrayImage8};

pub(crate) fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= sum);
    k
}

/// Separable Gaussian blur with radius `ceil(3 sigma)` and clamp-to-edge borders.
///
/// Both passes run in `f64`; the result is quantized once, half away from zero.
pub fn gaussian_smooth(img: &GrayImage8, sigma: f64) -> GrayImage8 {
    assert!(sigma > 0.0, "sigma must be positive");
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let (w, h) = img.dims();
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;

    let mut horiz = vec![0.0f64; w * h];
    for y in 0..h {
        let row = &img.data()[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (j, &kw) in k.iter().enumerate() {
                acc += kw * row[clamp(x as isize + j as isize - r, w)] as f64;
            }
            horiz[y * w + x] = acc;
        }
    }
    let mut out = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (j, &kw) in k.iter().enumerate() {
                acc += kw * horiz[clamp(y as isize + j as isize - r, h) * w + x];
            }
            out[y * w + x] = quantize_u8(acc);
        }
    }
    GrayImage8::new(w, h, out).expect("dims preserved")
}
