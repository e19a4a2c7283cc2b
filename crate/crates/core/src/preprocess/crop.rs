use crate::imagecore::GrayImage8;

use super::{binary_open, gaussian_smooth, largest_component, threshold_binary, BinaryMask, CropParams, Rect};

/// Result of [`auto_body_crop`]; `rect` is `None` when the crop fell back to the input.
#[derive(Debug, Clone, PartialEq)]
pub struct CropOutcome {
    pub image: GrayImage8,
    pub rect: Option<Rect>,
}

impl CropOutcome {
    pub fn is_fallback(&self) -> bool {
        self.rect.is_none()
    }
}

/// Body mask: the largest component of the opened, thresholded, smoothed image.
///
/// Returns `None` when nothing survives the opening. Holes are not filled.
pub fn body_mask(img: &GrayImage8, params: &CropParams) -> Option<(BinaryMask, Rect)> {
    let smoothed = gaussian_smooth(img, params.gaussian_sigma);
    let mask = threshold_binary(&smoothed, params.threshold);
    let opened = binary_open(&mask, params.structuring_element, params.opening_iterations);
    largest_component(&opened, params.connectivity).ok()
}

/// Crops `img` to the bounding box of its body mask.
pub fn auto_body_crop(img: &GrayImage8, params: &CropParams) -> CropOutcome {
    match body_mask(img, params) {
        Some((_, r)) => CropOutcome {
            image: img.crop(r.x, r.y, r.w, r.h),
            rect: Some(r),
        },
        None => CropOutcome {
            image: img.clone(),
            rect: None,
        },
    }
}

/// Replaces every pixel outside the body mask with the mean exterior intensity.
///
/// The mean is taken over the original exterior pixels and rounded half away from
/// zero. Inputs whose mask is empty or covers the whole frame are returned unchanged.
pub fn exterior_exclusion(img: &GrayImage8, params: &CropParams) -> GrayImage8 {
    let Some((mask, _)) = body_mask(img, params) else {
        return img.clone();
    };
    let (mut sum, mut n) = (0u64, 0u64);
    for (&v, &inside) in img.data().iter().zip(mask.bits()) {
        if !inside {
            sum += v as u64;
            n += 1;
        }
    }
    if n == 0 {
        return img.clone();
    }
    let mean = (sum as f64 / n as f64).round() as u8;
    let mut out = img.clone();
    for (v, &inside) in out.data_mut().iter_mut().zip(mask.bits()) {
        if !inside {
            *v = mean;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(size: usize, cx: f64, cy: f64, r: f64, value: u8) -> GrayImage8 {
        GrayImage8::from_fn(size, size, |x, y| {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            if dx * dx + dy * dy <= r * r {
                value
            } else {
                0
            }
        })
    }

    #[test]
    fn black_image_falls_back() {
        let img = GrayImage8::filled(32, 32, 0);
        let out = auto_body_crop(&img, &CropParams::default());
        assert!(out.is_fallback());
        assert_eq!(out.image, img);
        assert_eq!(exterior_exclusion(&img, &CropParams::default()), img);
    }

    #[test]
    fn filled_frame_barely_shrinks() {
        let img = GrayImage8::filled(40, 30, 200);
        let out = auto_body_crop(&img, &CropParams::default());
        let r = out.rect.unwrap();
        let se_r = CropParams::default().structuring_element / 2;
        assert!(r.w + 2 * se_r >= 40 && r.h + 2 * se_r >= 30);
        // whole-frame mask leaves the image untouched
        assert_eq!(exterior_exclusion(&img, &CropParams::default()), img);
    }

    #[test]
    fn disk_with_salt_noise_crops_to_disk() {
        let mut img = disk(96, 50.0, 44.0, 25.0, 180);
        for &(x, y) in &[(3usize, 3usize), (90, 10), (10, 88), (92, 92), (70, 5)] {
            img.set(x, y, 255);
        }
        let out = auto_body_crop(&img, &CropParams::default());
        let r = out.rect.unwrap();
        let tol = 2isize;
        let check = |got: usize, want: usize| (got as isize - want as isize).abs() <= tol;
        assert!(check(r.x, 25) && check(r.y, 19), "{r:?}");
        assert!(check(r.x + r.w - 1, 75) && check(r.y + r.h - 1, 69), "{r:?}");
        assert_eq!(out.image, img.crop(r.x, r.y, r.w, r.h));
    }

    #[test]
    fn exterior_becomes_uniform() {
        let mut img = disk(64, 32.0, 32.0, 18.0, 150);
        for x in 0..64 {
            img.set(x, 60, 90);
            img.set(x, 2, 10);
        }
        let out = exterior_exclusion(&img, &CropParams::default());
        let (mask, _) = body_mask(&img, &CropParams::default()).unwrap();
        let ext: Vec<u8> = out.data().iter().zip(mask.bits()).filter(|(_, &m)| !m).map(|(&v, _)| v).collect();
        assert!(ext.windows(2).all(|p| p[0] == p[1]));
        let orig: Vec<u64> =
            img.data().iter().zip(mask.bits()).filter(|(_, &m)| !m).map(|(&v, _)| v as u64).collect();
        let mu = (orig.iter().sum::<u64>() as f64 / orig.len() as f64).round() as u8;
        assert_eq!(ext[0], mu);
        for ((&a, &b), &m) in img.data().iter().zip(out.data()).zip(mask.bits()) {
            if m {
                assert_eq!(a, b);
            }
        }
    }
}
