use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use png::{BitDepth, ColorType, Transformations};

use super::{GrayImage8, ImageError, RgbImage8};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ImageError + '_ {
    move |source| ImageError::Io {
        path: path.to_path_buf(),
        source,
    }
}

struct Decoded {
    width: usize,
    height: usize,
    channels: usize,
    // samples already reduced to 8 bits
    samples: Vec<u8>,
}

fn decode(path: &Path) -> Result<Decoded, ImageError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(Transformations::IDENTITY);
    let png_err = |e: png::DecodingError| match e {
        png::DecodingError::IoError(source) => ImageError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => ImageError::PngDecode {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    };
    let mut reader = decoder.read_info().map_err(png_err)?;
    let (color, depth) = reader.output_color_type();
    let channels = match color {
        ColorType::Grayscale => 1,
        ColorType::GrayscaleAlpha => 2,
        ColorType::Rgb => 3,
        ColorType::Rgba => 4,
        ColorType::Indexed => return Err(ImageError::UnsupportedPng("palette image".into())),
    };
    if !matches!(depth, BitDepth::Eight | BitDepth::Sixteen) {
        return Err(ImageError::UnsupportedPng(format!("bit depth {depth:?}")));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| ImageError::UnsupportedPng("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(png_err)?;
    buf.truncate(info.buffer_size());
    let samples = match depth {
        // 16-bit samples are big-endian; keep the high byte (v >> 8)
        BitDepth::Sixteen => buf.chunks_exact(2).map(|c| c[0]).collect(),
        _ => buf,
    };
    Ok(Decoded {
        width: info.width as usize,
        height: info.height as usize,
        channels,
        samples,
    })
}

/// Loads a PNG as 8-bit grayscale.
///
/// 16-bit samples are reduced by `v >> 8`. Alpha is dropped and color images are
/// converted with Rec. 601 luma weights. Palette and sub-byte images are rejected.
pub fn load_png(path: impl AsRef<Path>) -> Result<GrayImage8, ImageError> {
    let d = decode(path.as_ref())?;
    let data = match d.channels {
        1 => d.samples,
        2 => d.samples.chunks_exact(2).map(|c| c[0]).collect(),
        n => d
            .samples
            .chunks_exact(n)
            .map(|c| super::quantize_u8(0.299 * c[0] as f64 + 0.587 * c[1] as f64 + 0.114 * c[2] as f64))
            .collect(),
    };
    GrayImage8::new(d.width, d.height, data)
}

/// Loads a PNG as 8-bit RGB; gray inputs are replicated across channels.
pub fn load_rgb_png(path: impl AsRef<Path>) -> Result<RgbImage8, ImageError> {
    let d = decode(path.as_ref())?;
    let mut data = Vec::with_capacity(d.width * d.height * 3);
    for px in d.samples.chunks_exact(d.channels) {
        match d.channels {
            1 | 2 => data.extend_from_slice(&[px[0], px[0], px[0]]),
            _ => data.extend_from_slice(&px[..3]),
        }
    }
    RgbImage8::new(d.width, d.height, data)
}

fn encode(path: &Path, width: usize, height: usize, color: ColorType, data: &[u8]) -> Result<(), ImageError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    enc.set_color(color);
    enc.set_depth(BitDepth::Eight);
    let wrap = |e: png::EncodingError| match e {
        png::EncodingError::IoError(source) => ImageError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => ImageError::PngDecode {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    };
    let mut writer = enc.write_header().map_err(wrap)?;
    writer.write_image_data(data).map_err(wrap)?;
    writer.finish().map_err(wrap)
}

/// Writes an 8-bit single-channel PNG.
pub fn save_png(path: impl AsRef<Path>, img: &GrayImage8) -> Result<(), ImageError> {
    encode(path.as_ref(), img.width(), img.height(), ColorType::Grayscale, img.data())
}

/// Writes an 8-bit RGB PNG.
pub fn save_rgb_png(path: impl AsRef<Path>, img: &RgbImage8) -> Result<(), ImageError> {
    encode(path.as_ref(), img.width(), img.height(), ColorType::Rgb, img.data())
}
