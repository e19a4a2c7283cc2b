//! Single-file NIfTI-1 (`.nii`) reader.
//!
//! Only the fields the conversion pipeline needs are decoded: `dim`, `datatype`,
//! `vox_offset`, `scl_slope`, `scl_inter` and `magic`. Byte order is detected from
//! `sizeof_hdr`, which must read 348 in one of the two orders.

use super::NiftiError;

const HEADER_SIZE: usize = 348;
const SIZEOF_HDR: usize = 0;
const DIM: usize = 40;
const DATATYPE: usize = 70;
const VOX_OFFSET: usize = 108;
const SCL_SLOPE: usize = 112;
const SCL_INTER: usize = 116;
const MAGIC: usize = 344;
const DEFAULT_VOX_OFFSET: usize = 352;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endianness {
    Little,
    Big,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Datatype {
    Int16,
    Float32,
}

impl Datatype {
    pub fn code(self) -> i16 {
        match self {
            Datatype::Int16 => 4,
            Datatype::Float32 => 16,
        }
    }

    fn bytes(self) -> usize {
        match self {
            Datatype::Int16 => 2,
            Datatype::Float32 => 4,
        }
    }
}

/// Raw stored voxel values, in file order (x fastest, then y, then z).
#[derive(Debug, Clone, PartialEq)]
pub enum Voxels {
    I16(Vec<i16>),
    F32(Vec<f32>),
}

impl Voxels {
    pub fn len(&self) -> usize {
        match self {
            Voxels::I16(v) => v.len(),
            Voxels::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn raw(&self, i: usize) -> f64 {
        match self {
            Voxels::I16(v) => v[i] as f64,
            Voxels::F32(v) => v[i] as f64,
        }
    }
}

/// Decoded CT volume in Hounsfield units after `value * slope + intercept`.
#[derive(Debug, Clone, PartialEq)]
pub struct CtVolume {
    pub dims: (usize, usize, usize),
    pub voxels: Voxels,
    pub scale_slope: f64,
    pub scale_intercept: f64,
    pub endianness: Endianness,
}

impl CtVolume {
    /// Builds a little-endian volume with identity scaling.
    pub fn new(dims: (usize, usize, usize), voxels: Voxels) -> Result<Self, NiftiError> {
        let (nx, ny, nz) = dims;
        if nx == 0 || ny == 0 || nz == 0 || voxels.len() != nx * ny * nz {
            return Err(NiftiError::BadDimensions([
                3,
                nx.min(i16::MAX as usize) as i16,
                ny.min(i16::MAX as usize) as i16,
                nz.min(i16::MAX as usize) as i16,
            ]));
        }
        Ok(Self {
            dims,
            voxels,
            scale_slope: 1.0,
            scale_intercept: 0.0,
            endianness: Endianness::Little,
        })
    }

    pub fn nz(&self) -> usize {
        self.dims.2
    }

    pub fn datatype(&self) -> Datatype {
        match self.voxels {
            Voxels::I16(_) => Datatype::Int16,
            Voxels::F32(_) => Datatype::Float32,
        }
    }

    /// Scaled (Hounsfield) value of voxel `i` in file order.
    #[inline]
    pub fn hu(&self, i: usize) -> f64 {
        self.voxels.raw(i) * self.scale_slope + self.scale_intercept
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    endian: Endianness,
}

impl Reader<'_> {
    fn arr<const N: usize>(&self, at: usize) -> [u8; N] {
        let mut a = [0u8; N];
        a.copy_from_slice(&self.bytes[at..at + N]);
        a
    }

    fn i16(&self, at: usize) -> i16 {
        match self.endian {
            Endianness::Little => i16::from_le_bytes(self.arr(at)),
            Endianness::Big => i16::from_be_bytes(self.arr(at)),
        }
    }

    fn f32(&self, at: usize) -> f32 {
        match self.endian {
            Endianness::Little => f32::from_le_bytes(self.arr(at)),
            Endianness::Big => f32::from_be_bytes(self.arr(at)),
        }
    }
}

/// Parses an uncompressed single-file NIfTI-1 byte stream.
pub fn parse_nifti(bytes: &[u8]) -> Result<CtVolume, NiftiError> {
    if bytes.len() < 4 {
        return Err(NiftiError::Truncated {
            needed: HEADER_SIZE,
            available: bytes.len(),
        });
    }
    let sizeof: [u8; 4] = bytes[SIZEOF_HDR..SIZEOF_HDR + 4].try_into().unwrap();
    let endian = if i32::from_le_bytes(sizeof) == HEADER_SIZE as i32 {
        Endianness::Little
    } else if i32::from_be_bytes(sizeof) == HEADER_SIZE as i32 {
        Endianness::Big
    } else {
        return Err(NiftiError::BadHeaderSize);
    };
    if bytes.len() < HEADER_SIZE {
        return Err(NiftiError::Truncated {
            needed: HEADER_SIZE,
            available: bytes.len(),
        });
    }
    let r = Reader { bytes, endian };

    let magic: [u8; 4] = r.arr(MAGIC);
    if &magic != b"n+1\0" && &magic != b"ni1\0" {
        return Err(NiftiError::BadMagic(magic));
    }

    let ndim = r.i16(DIM);
    let mut dim = [1i16; 4];
    dim[0] = ndim;
    if !(1..=7).contains(&ndim) {
        return Err(NiftiError::BadDimensions([ndim, r.i16(DIM + 2), r.i16(DIM + 4), r.i16(DIM + 6)]));
    }
    // only the spatial dims are read; a 4-D series contributes its first volume
    for (k, d) in dim.iter_mut().enumerate().skip(1).take(ndim.min(3) as usize) {
        *d = r.i16(DIM + 2 * k);
    }
    if dim[1..].iter().any(|&d| d < 1) {
        return Err(NiftiError::BadDimensions(dim));
    }
    let (nx, ny, nz) = (dim[1] as usize, dim[2] as usize, dim[3] as usize);

    let code = r.i16(DATATYPE);
    let datatype = match code {
        4 => Datatype::Int16,
        16 => Datatype::Float32,
        other => return Err(NiftiError::UnsupportedDatatype(other)),
    };

    let vox_offset = r.f32(VOX_OFFSET);
    let offset = if vox_offset.is_finite() && vox_offset >= HEADER_SIZE as f32 {
        vox_offset as usize
    } else {
        DEFAULT_VOX_OFFSET
    };
    let count = nx * ny * nz;
    let needed = offset + count * datatype.bytes();
    if bytes.len() < needed {
        return Err(NiftiError::Truncated {
            needed,
            available: bytes.len(),
        });
    }
    let payload = &bytes[offset..needed];
    let voxels = match datatype {
        Datatype::Int16 => Voxels::I16(
            payload
                .chunks_exact(2)
                .map(|c| {
                    let a = [c[0], c[1]];
                    match endian {
                        Endianness::Little => i16::from_le_bytes(a),
                        Endianness::Big => i16::from_be_bytes(a),
                    }
                })
                .collect(),
        ),
        Datatype::Float32 => Voxels::F32(
            payload
                .chunks_exact(4)
                .map(|c| {
                    let a = [c[0], c[1], c[2], c[3]];
                    match endian {
                        Endianness::Little => f32::from_le_bytes(a),
                        Endianness::Big => f32::from_be_bytes(a),
                    }
                })
                .collect(),
        ),
    };

    // scl_slope == 0 means "no scaling"
    let slope = r.f32(SCL_SLOPE) as f64;
    let inter = r.f32(SCL_INTER) as f64;
    let (scale_slope, scale_intercept) = if slope != 0.0 && slope.is_finite() {
        (slope, if inter.is_finite() { inter } else { 0.0 })
    } else {
        (1.0, 0.0)
    };

    Ok(CtVolume {
        dims: (nx, ny, nz),
        voxels,
        scale_slope,
        scale_intercept,
        endianness: endian,
    })
}
