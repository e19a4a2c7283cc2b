use super::{quantize_u8, FloatImage, GrayImage8};

/// Bilinear resampling with half-pixel-centered sample positions.
///
/// Output pixel `x` samples the source at `(x + 0.5) * in_w / out_w - 0.5`, clamped to
/// the valid range, so resizing to the same dimensions is the identity.
pub trait BilinearResize: Sized {
    fn resize_bilinear(&self, out_w: usize, out_h: usize) -> Self;
}

#[derive(Clone, Copy)]
struct Tap {
    i0: usize,
    i1: usize,
    frac: f64,
}

fn taps(in_len: usize, out_len: usize) -> Vec<Tap> {
    let scale = in_len as f64 / out_len as f64;
    (0..out_len)
        .map(|o| {
            let s = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (in_len - 1) as f64);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(in_len - 1);
            Tap {
                i0,
                i1,
                frac: s - i0 as f64,
            }
        })
        .collect()
}

fn resample(
    src: impl Fn(usize, usize, usize) -> f64,
    in_w: usize,
    in_h: usize,
    channels: usize,
    out_w: usize,
    out_h: usize,
    mut emit: impl FnMut(f64),
) {
    assert!(out_w >= 1 && out_h >= 1, "output dimensions must be positive");
    let xs = taps(in_w, out_w);
    let ys = taps(in_h, out_h);
    for ty in &ys {
        for tx in &xs {
            for c in 0..channels {
                let top = src(tx.i0, ty.i0, c) * (1.0 - tx.frac) + src(tx.i1, ty.i0, c) * tx.frac;
                let bot = src(tx.i0, ty.i1, c) * (1.0 - tx.frac) + src(tx.i1, ty.i1, c) * tx.frac;
                emit(top * (1.0 - ty.frac) + bot * ty.frac);
            }
        }
    }
}

impl BilinearResize for GrayImage8 {
    fn resize_bilinear(&self, out_w: usize, out_h: usize) -> Self {
        if (out_w, out_h) == self.dims() {
            return self.clone();
        }
        let mut data = Vec::with_capacity(out_w * out_h);
        let w = self.width();
        resample(
            |x, y, _| self.data()[y * w + x] as f64,
            w,
            self.height(),
            1,
            out_w,
            out_h,
            |v| data.push(quantize_u8(v)),
        );
        GrayImage8::new(out_w, out_h, data).expect("resample emits out_w*out_h values")
    }
}

impl BilinearResize for FloatImage {
    fn resize_bilinear(&self, out_w: usize, out_h: usize) -> Self {
        if (out_w, out_h) == (self.width(), self.height()) {
            return self.clone();
        }
        let ch = self.channels();
        let w = self.width();
        let mut data = Vec::with_capacity(out_w * out_h * ch);
        resample(
            |x, y, c| self.data()[(y * w + x) * ch + c] as f64,
            w,
            self.height(),
            ch,
            out_w,
            out_h,
            |v| data.push(v as f32),
        );
        FloatImage::new(out_w, out_h, ch, data).expect("resample emits the full buffer")
    }
}
