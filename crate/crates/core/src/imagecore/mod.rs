//! Raster and volume I/O: PNG, NIfTI-1, Hounsfield windowing and resizing.

mod image;
mod nifti;
mod png_io;
mod resize;
mod window;

pub use self::image::{FloatImage, GrayImage8, RgbImage8};
pub use self::nifti::{parse_nifti, CtVolume, Datatype, Endianness, Voxels};
pub use self::png_io::{load_png, load_rgb_png, save_png, save_rgb_png};
pub use self::resize::BilinearResize;
pub use self::window::{hu_window, select_open_lung_slices, HuWindow, SliceBand};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum ImageError {
    #[error("buffer of {len} values does not match {width}x{height}x{channels}")]
    BadDimensions {
        width: usize,
        height: usize,
        channels: usize,
        len: usize,
    },
    #[error("slice index {index} out of range for {nz} slices")]
    IndexOutOfRange { index: usize, nz: usize },
    #[error("slice band ({lo}, {hi}) selects no slices of a {nz}-slice volume")]
    EmptyBand { lo: f64, hi: f64, nz: usize },
    #[error("invalid slice band ({lo}, {hi}); need 0 <= lo < hi <= 1")]
    InvalidBand { lo: f64, hi: f64 },
    #[error("invalid HU window [{lo}, {hi}]; need lo < hi")]
    InvalidWindow { lo: f64, hi: f64 },
    #[error("unsupported PNG: {0}")]
    UnsupportedPng(String),
    #[error("PNG decode error in {path}: {message}")]
    PngDecode { path: PathBuf, message: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum NiftiError {
    #[error("sizeof_hdr is not 348 under either byte order")]
    BadHeaderSize,
    #[error("bad magic {0:?}; expected \"n+1\\0\" or \"ni1\\0\"")]
    BadMagic([u8; 4]),
    #[error("unsupported datatype code {0}; only int16 (4) and float32 (16) are read")]
    UnsupportedDatatype(i16),
    #[error("invalid dimensions {0:?}")]
    BadDimensions([i16; 4]),
    #[error("truncated file: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
}

/// Rounds half away from zero and saturates into `0..=255`.
#[inline]
pub(crate) fn quantize_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}
