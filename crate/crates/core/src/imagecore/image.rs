use super::ImageError;

/// 8-bit single-channel raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage8 {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage8 {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(ImageError::BadDimensions {
                width,
                height,
                channels: 1,
                len: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    /// Copies out the sub-rectangle at `(x, y)` of size `w x h`.
    ///
    /// Panics if the rectangle leaves the image or is empty.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> GrayImage8 {
        assert!(w > 0 && h > 0 && x + w <= self.width && y + h <= self.height);
        let mut data = Vec::with_capacity(w * h);
        for row in y..y + h {
            let start = row * self.width + x;
            data.extend_from_slice(&self.data[start..start + w]);
        }
        GrayImage8 {
            width: w,
            height: h,
            data,
        }
    }

    /// Converts to floats in `[0, 1]` by dividing every pixel by 255.
    pub fn to_unit_interval(&self) -> FloatImage {
        FloatImage {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.data.iter().map(|&v| v as f32 / 255.0).collect(),
        }
    }

    /// Replicates the gray channel into RGB.
    pub fn to_rgb(&self) -> RgbImage8 {
        let mut data = Vec::with_capacity(self.data.len() * 3);
        for &v in &self.data {
            data.extend_from_slice(&[v, v, v]);
        }
        RgbImage8 {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

/// Floating-point raster with 1 or 3 interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl FloatImage {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f32>,
    ) -> Result<Self, ImageError> {
        if width == 0
            || height == 0
            || !(channels == 1 || channels == 3)
            || data.len() != width * height * channels
        {
            return Err(ImageError::BadDimensions {
                width,
                height,
                channels,
                len: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn gray(width: usize, height: usize, data: Vec<f32>) -> Result<Self, ImageError> {
        Self::new(width, height, 1, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn mean(&self) -> f32 {
        let s: f64 = self.data.iter().map(|&v| v as f64).sum();
        (s / self.data.len() as f64) as f32
    }

    /// Quantizes a single-channel image in `[0, 1]` to 8 bits (`round(255 v)`, clamped).
    pub fn to_gray8(&self) -> GrayImage8 {
        assert_eq!(self.channels, 1, "to_gray8 needs a single-channel image");
        GrayImage8 {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .map(|&v| super::quantize_u8(255.0 * v as f64))
                .collect(),
        }
    }
}

/// 8-bit interleaved RGB raster used for rendered saliency outputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage8 {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage8 {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 || data.len() != width * height * 3 {
            return Err(ImageError::BadDimensions {
                width,
                height,
                channels: 3,
                len: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_interval_endpoints() {
        let img = GrayImage8::new(3, 1, vec![0, 51, 255]).unwrap();
        let f = img.to_unit_interval();
        assert_eq!(f.data(), &[0.0, 0.2, 1.0]);
        assert_eq!(f.channels(), 1);
    }

    #[test]
    fn unit_interval_exact_for_all_levels() {
        let img = GrayImage8::new(256, 1, (0..=255).collect()).unwrap();
        let f = img.to_unit_interval();
        for (i, &v) in f.data().iter().enumerate() {
            assert!((0.0..=1.0).contains(&v));
            assert_eq!((255.0 * v).round() as usize, i);
            assert_eq!(v, i as f32 / 255.0);
        }
        assert_eq!(f.to_gray8(), img);
    }

    #[test]
    fn rejects_bad_buffers() {
        assert!(GrayImage8::new(2, 2, vec![0; 3]).is_err());
        assert!(GrayImage8::new(0, 2, vec![]).is_err());
        assert!(FloatImage::new(2, 2, 2, vec![0.0; 8]).is_err());
    }

    #[test]
    fn crop_copies_window() {
        let img = GrayImage8::from_fn(4, 3, |x, y| (10 * y + x) as u8);
        let c = img.crop(1, 1, 2, 2);
        assert_eq!(c.data(), &[11, 12, 21, 22]);
    }
}
