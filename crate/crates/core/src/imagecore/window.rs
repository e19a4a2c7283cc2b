use super::{quantize_u8, CtVolume, GrayImage8, ImageError};

/// Hounsfield display window `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HuWindow {
    lo: f64,
    hi: f64,
}

impl HuWindow {
    /// Lung window used when none is configured.
    pub const LUNG: HuWindow = HuWindow {
        lo: -1200.0,
        hi: 600.0,
    };

    pub fn new(lo: f64, hi: f64) -> Result<Self, ImageError> {
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(ImageError::InvalidWindow { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Maps one HU value to 8 bits: `round(255 * (clamp(v) - lo) / (hi - lo))`.
    #[inline]
    pub fn map(&self, hu: f64) -> u8 {
        let v = hu.clamp(self.lo, self.hi);
        quantize_u8(255.0 * (v - self.lo) / (self.hi - self.lo))
    }
}

impl Default for HuWindow {
    fn default() -> Self {
        Self::LUNG
    }
}

/// Fractional band of the slice axis, `0 <= lo < hi <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SliceBand {
    pub lo: f64,
    pub hi: f64,
}

impl Default for SliceBand {
    fn default() -> Self {
        Self { lo: 0.30, hi: 0.70 }
    }
}

// products like 0.7 * 10 may land a hair off an integer
fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        r
    } else {
        v
    }
}

/// Indices `k` with `floor(lo * nz) <= k < ceil(hi * nz)`, ascending.
pub fn select_open_lung_slices(volume: &CtVolume, band: SliceBand) -> Result<Vec<usize>, ImageError> {
    slice_range(volume.nz(), band).map(|r| r.collect())
}

pub(crate) fn slice_range(nz: usize, band: SliceBand) -> Result<std::ops::Range<usize>, ImageError> {
    let SliceBand { lo, hi } = band;
    if !(0.0..1.0).contains(&lo) || !(hi > lo && hi <= 1.0) {
        return Err(ImageError::InvalidBand { lo, hi });
    }
    let start = snap(lo * nz as f64).floor() as usize;
    let end = (snap(hi * nz as f64).ceil() as usize).min(nz);
    if start >= end {
        return Err(ImageError::EmptyBand { lo, hi, nz });
    }
    Ok(start..end)
}

/// Windows slice `slice_index` of `volume` into an 8-bit image of size `(nx, ny)`.
pub fn hu_window(volume: &CtVolume, slice_index: usize, window: HuWindow) -> Result<GrayImage8, ImageError> {
    let (nx, ny, nz) = volume.dims;
    if slice_index >= nz {
        return Err(ImageError::IndexOutOfRange {
            index: slice_index,
            nz,
        });
    }
    let base = slice_index * nx * ny;
    let data = (base..base + nx * ny).map(|i| window.map(volume.hu(i))).collect();
    GrayImage8::new(nx, ny, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::Voxels;

    fn volume(nz: usize) -> CtVolume {
        CtVolume::new((1, 1, nz), Voxels::I16(vec![0; nz])).unwrap()
    }

    #[test]
    fn default_band_on_ten_slices() {
        assert_eq!(select_open_lung_slices(&volume(10), SliceBand::default()).unwrap(), vec![3, 4, 5, 6]);
    }

    #[test]
    fn degenerate_single_slice() {
        let band = SliceBand { lo: 0.0, hi: 1.0 };
        assert_eq!(select_open_lung_slices(&volume(1), band).unwrap(), vec![0]);
    }

    #[test]
    fn hundred_slices() {
        let s = select_open_lung_slices(&volume(100), SliceBand::default()).unwrap();
        assert_eq!(s.len(), 40);
        assert_eq!(s[0], 30);
        assert_eq!(*s.last().unwrap(), 69);
    }

    #[test]
    fn empty_and_invalid_bands() {
        let narrow = SliceBand { lo: 0.5, hi: 0.5 };
        assert!(matches!(
            select_open_lung_slices(&volume(10), narrow),
            Err(ImageError::InvalidBand { .. })
        ));
        // floor(0.6) = 0, ceil(0.6) = 1 still selects slice 0 of a 1-slice volume
        assert_eq!(slice_range(1, SliceBand { lo: 0.3, hi: 0.7 }).unwrap(), 0..1);
        assert_eq!(slice_range(2, SliceBand { lo: 0.99, hi: 1.0 }).unwrap(), 1..2);
        assert!(matches!(slice_range(0, SliceBand::default()), Err(ImageError::EmptyBand { .. })));
    }

    #[test]
    fn window_endpoints_and_midpoint() {
        let w = HuWindow::LUNG;
        assert_eq!(w.map(-1200.0), 0);
        assert_eq!(w.map(600.0), 255);
        assert_eq!(w.map(-300.0), 128);
        assert_eq!(w.map(-3000.0), 0);
        assert_eq!(w.map(3000.0), 255);
        assert!(HuWindow::new(5.0, 5.0).is_err());
    }

    #[test]
    fn window_matches_scalar_reference() {
        let (nx, ny, nz) = (17, 13, 3);
        let mut s: u32 = 12345;
        let vox: Vec<i16> = (0..nx * ny * nz)
            .map(|_| {
                s = s.wrapping_mul(1664525).wrapping_add(1013904223);
                (s >> 16) as i16
            })
            .collect();
        let mut vol = CtVolume::new((nx, ny, nz), Voxels::I16(vox.clone())).unwrap();
        vol.scale_slope = 1.0;
        vol.scale_intercept = -1024.0;
        let w = HuWindow::LUNG;
        let img = hu_window(&vol, 1, w).unwrap();
        for y in 0..ny {
            for x in 0..nx {
                let v = vox[nx * ny + y * nx + x] as f64 - 1024.0;
                let c = v.clamp(-1200.0, 600.0);
                let expect = (255.0 * (c + 1200.0) / 1800.0).round() as u8;
                assert_eq!(img.get(x, y), expect);
            }
        }
        assert!(matches!(hu_window(&vol, 3, w), Err(ImageError::IndexOutOfRange { .. })));
    }

    #[test]
    fn window_is_monotone() {
        let w = HuWindow::new(-1000.0, 400.0).unwrap();
        let mut prev = 0u8;
        for hu in -1500..1500 {
            let v = w.map(hu as f64);
            assert!(v >= prev);
            prev = v;
        }
    }
}
