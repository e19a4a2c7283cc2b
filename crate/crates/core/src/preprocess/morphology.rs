use crate::imagecore::GrayImage8;

/// Row-major binary mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), width * height, "mask length must equal width * height");
        Self { width, height, bits }
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Pointwise `self ⊆ other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }
}

/// `true` where the pixel is at least `t`.
pub fn threshold_binary(img: &GrayImage8, t: u8) -> BinaryMask {
    BinaryMask {
        width: img.width(),
        height: img.height(),
        bits: img.data().iter().map(|&v| v >= t).collect(),
    }
}

// A square structuring element factors into a row pass and a column pass.
// `all = true` is erosion (every covered bit set, out-of-bounds counts as unset),
// `all = false` is dilation (any covered bit set).
fn square_pass(mask: &BinaryMask, side: usize, all: bool) -> BinaryMask {
    assert!(side >= 3 && side % 2 == 1, "structuring element side must be odd and >= 3");
    let r = side / 2;
    let (w, h) = (mask.width, mask.height);

    // prefix counts turn each window test into O(1)
    let window = |count_at: &dyn Fn(usize) -> bool, n: usize| -> Vec<bool> {
        let mut prefix = vec![0usize; n + 1];
        for i in 0..n {
            prefix[i + 1] = prefix[i] + count_at(i) as usize;
        }
        (0..n)
            .map(|i| {
                if all {
                    if i < r || i + r >= n {
                        return false;
                    }
                    prefix[i + r + 1] - prefix[i - r] == side
                } else {
                    let lo = i.saturating_sub(r);
                    let hi = (i + r + 1).min(n);
                    prefix[hi] - prefix[lo] > 0
                }
            })
            .collect()
    };

    let mut rows = vec![false; w * h];
    for y in 0..h {
        let line = window(&|x| mask.bits[y * w + x], w);
        rows[y * w..(y + 1) * w].copy_from_slice(&line);
    }
    let mut out = vec![false; w * h];
    for x in 0..w {
        let col = window(&|y| rows[y * w + x], h);
        for (y, v) in col.into_iter().enumerate() {
            out[y * w + x] = v;
        }
    }
    BinaryMask { width: w, height: h, bits: out }
}

/// Erosion by a `side x side` square; pixels outside the mask count as unset.
pub fn erode(mask: &BinaryMask, side: usize) -> BinaryMask {
    square_pass(mask, side, true)
}

/// Dilation by a `side x side` square.
pub fn dilate(mask: &BinaryMask, side: usize) -> BinaryMask {
    square_pass(mask, side, false)
}

/// `iterations` rounds of erosion followed by dilation.
pub fn binary_open(mask: &BinaryMask, side: usize, iterations: usize) -> BinaryMask {
    let mut m = mask.clone();
    for _ in 0..iterations {
        m = dilate(&erode(&m, side), side);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isolated_pixel_is_removed() {
        let mut m = BinaryMask::empty(9, 9);
        m.set(4, 4, true);
        assert_eq!(binary_open(&m, 3, 1).count(), 0);
    }

    #[test]
    fn solid_square_survives_opening() {
        let m = BinaryMask::from_fn(11, 11, |x, y| (3..8).contains(&x) && (3..8).contains(&y));
        assert_eq!(binary_open(&m, 3, 1), m);
    }

    #[test]
    fn threshold_boundary_is_inclusive() {
        let img = GrayImage8::new(3, 1, vec![24, 25, 26]).unwrap();
        assert_eq!(threshold_binary(&img, 25).bits(), &[false, true, true]);
        let zero = GrayImage8::filled(4, 4, 0);
        assert_eq!(threshold_binary(&zero, 25).count(), 0);
    }

    #[test]
    fn threshold_matches_scalar_loop() {
        let mut s = 99u64;
        let img = GrayImage8::from_fn(31, 17, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            (s >> 56) as u8
        });
        for t in [1u8, 25, 128, 254] {
            let m = threshold_binary(&img, t);
            for y in 0..17 {
                for x in 0..31 {
                    assert_eq!(m.get(x, y), img.get(x, y) >= t);
                }
            }
        }
    }

    #[test]
    fn border_erodes_away() {
        let full = BinaryMask::from_fn(6, 6, |_, _| true);
        let e = erode(&full, 3);
        assert!(!e.get(0, 0) && !e.get(5, 3) && e.get(1, 1) && e.get(4, 4));
        assert_eq!(dilate(&e, 3), full);
    }
}
